"""Interventions, text metrics, and the statistics harness."""

from .ops import InterventionSpec, apply_intervention, apply_to_stack, default_delta, resolve_layers
from .stats import bh_fdr, bootstrap_ci, cliffs_delta, wilcoxon_signed_rank
from .study import EffectReport, StudyConfig, run_effect_study
from .textmetrics import load_lexicon, text_metrics

__all__ = [
    "EffectReport",
    "InterventionSpec",
    "StudyConfig",
    "apply_intervention",
    "apply_to_stack",
    "bh_fdr",
    "bootstrap_ci",
    "cliffs_delta",
    "default_delta",
    "load_lexicon",
    "resolve_layers",
    "run_effect_study",
    "text_metrics",
    "wilcoxon_signed_rank",
]
