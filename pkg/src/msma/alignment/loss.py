"""Loss configuration, single-point evaluation, and the training report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from .curvature import curvature_penalty


@dataclass
class LossConfig:
    lambda_geo: float = 0.1
    lambda_info: float = 0.1
    lambda_curv: float = 0.01
    ib_beta: float = 1.0  # information-bottleneck diagnostic weight
    # optimizer (Adam) and schedule
    lr: float = 2e-5
    lr_schedule: str = "constant"  # constant | cosine
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 128
    epochs: int = 15
    full_batch: bool = False  # monotonicity-friendly mode
    # map / heads
    map_kind: str = "linear"  # linear | mlp
    mlp_hidden: int = None
    heads_enabled: bool = None  # None -> enabled when the stack has labels
    cls_in_total: bool = True
    head_dims: tuple = None  # None -> from stack tasks (fallback 62/3/3)
    temperature: float = 2.0
    label_smoothing: float = 0.1
    # MINE critics
    critic_steps: int = 5  # critic updates per map step
    critic_hidden: int = 128
    critic_lr: float = 1e-4
    ema_rate: float = 0.01
    # curvature
    curv_knn: int = 10  # reporting-path neighborhoods (curvature_penalty)
    curv_dim: int = 2
    curv_batch: int = 128  # mapped points per curvature gradient estimate
    curv_train_knn: int = 48  # larger fits resist noise overfit in training
    curv_view: int = 8  # PCA view for the training-time curvature proxy
    # evaluation
    metric_every: int = 1  # epochs between metric triples (0 = final only)
    metric_max_n: int = 512  # subsample for the KSG metric
    metric_pca: int = 50
    seed: int = 0

    def __post_init__(self):
        for name in ("lambda_geo", "lambda_info", "lambda_curv"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.map_kind not in ("linear", "mlp"):
            raise ValidationError("map_kind must be 'linear' or 'mlp'")


@dataclass
class LossReport:
    steps: list = field(default_factory=list)  # per-step loss dicts
    epoch_metrics: list = field(default_factory=list)  # per-epoch metric triples
    final_metrics: dict = field(default_factory=dict)
    error_budget: dict = field(default_factory=dict)
    config: LossConfig = None

    def step_series(self, key):
        return np.array([s[key] for s in self.steps])


def loss_eval(maps, scales, heads, labels, cfg: LossConfig) -> dict:
    """Evaluate the weighted loss at the current parameters.

    maps: {"gi": map, "il": map}. The information term uses each map's
    attached critic (its smoothed MINE bound); without a critic the term
    is 0. L_cls is reported separately and enters L_total only when
    heads are enabled and cfg.cls_in_total.
    """
    hG, hI, hL = scales.h_global, scales.h_intermediate, scales.h_local
    mapped_gi = maps["gi"].apply(hG)
    mapped_il = maps["il"].apply(hI)
    if mapped_gi.shape != hI.shape or mapped_il.shape != hL.shape:
        raise ValidationError("mapped shapes do not match target scales")
    n = hG.shape[0]
    l_geo = float(((mapped_gi - hI) ** 2).sum() / n + ((mapped_il - hL) ** 2).sum() / n)

    l_info = 0.0
    for m in maps.values():
        if getattr(m, "critic", None) is not None:
            l_info -= m.critic.smoothed_bound

    l_curv = 0.0
    if cfg.lambda_curv > 0:
        for mapped in (mapped_gi, mapped_il):
            l_curv += curvature_penalty(mapped, k_nn=cfg.curv_knn, local_dim=cfg.curv_dim).value

    l_cls = None
    if heads is not None and labels is not None:
        reps = {"global": hG, "intermediate": hI, "local": hL}
        l_cls, _, _ = heads.loss_and_grads(reps, labels)

    total = cfg.lambda_geo * l_geo + cfg.lambda_info * l_info + cfg.lambda_curv * l_curv
    if l_cls is not None and cfg.cls_in_total:
        total += l_cls
    return {
        "L_geo": l_geo,
        "L_info": l_info,
        "L_curv": l_curv,
        "L_cls": l_cls,
        "L_total": total,
    }
