"""Paired baseline-vs-intervened effect studies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..rng import child_seed
from .stats import bh_fdr, bootstrap_ci, cliffs_delta, wilcoxon_signed_rank
from .textmetrics import text_metrics


@dataclass
class StudyConfig:
    bootstrap_reps: int = 1000
    ci_level: float = 0.95
    seed: int = 0


@dataclass
class EffectReport:
    rows: list  # one dict per metric
    repetitions: int
    config: StudyConfig = field(default_factory=StudyConfig)

    def row(self, metric):
        for r in self.rows:
            if r["metric"] == metric:
                return r
        raise KeyError(metric)


def _metrics_table(items, lexicon=None):
    """texts or metric dicts -> {metric: array}."""
    if all(isinstance(x, str) for x in items):
        items = [text_metrics(t, lexicon=lexicon) for t in items]
    keys = sorted(set().union(*(d.keys() for d in items)))
    table = {}
    for k in keys:
        vals = [d.get(k) for d in items]
        if all(v is not None for v in vals):
            table[k] = np.array(vals, dtype=float)
    return table


def run_effect_study(baseline, intervened, cfg: StudyConfig = None, lexicon=None) -> EffectReport:
    """Per-metric paired comparison with Wilcoxon p, Cliff's delta,
    BH-FDR adjustment, and a bootstrap CI on the median percent change.

    baseline/intervened: lists of texts, lists of metric dicts, or
    {metric: array} tables. Pairing is positional.
    """
    cfg = cfg or StudyConfig()
    if not isinstance(baseline, dict):
        baseline = _metrics_table(baseline, lexicon)
    if not isinstance(intervened, dict):
        intervened = _metrics_table(intervened, lexicon)
    metrics = sorted(set(baseline) & set(intervened))
    if not metrics:
        raise ValidationError("no shared metrics between baseline and intervened")

    rows = []
    reps = None
    for metric in metrics:
        b = np.asarray(baseline[metric], dtype=float)
        v = np.asarray(intervened[metric], dtype=float)
        if b.shape != v.shape:
            raise ValidationError(f"unpaired lengths for metric {metric!r}")
        reps = len(b) if reps is None else reps
        if len(b) != reps:
            raise ValidationError("metrics have inconsistent repetition counts")
        diffs = v - b
        nonzero_base = b != 0.0
        pct = (
            100.0 * (v[nonzero_base] - b[nonzero_base]) / b[nonzero_base]
            if nonzero_base.any()
            else np.array([])
        )
        median_pct = float(np.median(pct)) if pct.size else float("nan")
        delta = cliffs_delta(v, b)
        p = 1.0 if not np.any(diffs != 0.0) else wilcoxon_signed_rank(diffs)
        if pct.size >= 10:
            ci = bootstrap_ci(
                np.median, pct, reps=cfg.bootstrap_reps, level=cfg.ci_level,
                seed=child_seed(cfg.seed, "study", metric),
            )
        else:
            ci = (float("nan"), float("nan"))
        rows.append(
            {
                "metric": metric,
                "median_change_pct": median_pct,
                "cliffs_delta": delta,
                "p": p,
                "ci_lo": ci[0],
                "ci_hi": ci[1],
            }
        )
    adjusted = bh_fdr([r["p"] for r in rows])
    for r, adj in zip(rows, adjusted):
        r["p_adjusted"] = float(adj)
        r["significance"] = "**" if adj < 0.01 else ("*" if adj < 0.05 else "")
    return EffectReport(rows=rows, repetitions=reps or 0, config=cfg)
