"""Cross-scale mapping training under the geometric/information/curvature loss."""

from .additivity import error_additivity_check, ib_objective_estimate
from .curvature import CurvatureResult, curvature_penalty, curvature_with_grad
from .heads import DEFAULT_HEAD_DIMS, ClassifierHeads
from .loss import LossConfig, LossReport, loss_eval
from .maps import LinearMap, MlpMap, ProcrustesMap, fit_linear_map, fit_procrustes
from .pooling import ScaleRepresentation, pool_scales
from .training import (
    AlignmentRun,
    default_ablation_grid,
    metric_triple,
    run_ablation,
    train_alignment,
    train_mlp_map,
)

__all__ = [
    "AlignmentRun",
    "ClassifierHeads",
    "CurvatureResult",
    "DEFAULT_HEAD_DIMS",
    "LinearMap",
    "LossConfig",
    "LossReport",
    "MlpMap",
    "ProcrustesMap",
    "ScaleRepresentation",
    "curvature_penalty",
    "curvature_with_grad",
    "default_ablation_grid",
    "error_additivity_check",
    "fit_linear_map",
    "fit_procrustes",
    "ib_objective_estimate",
    "loss_eval",
    "metric_triple",
    "pool_scales",
    "run_ablation",
    "train_alignment",
    "train_mlp_map",
]
