"""Nonparametric statistics: Cliff's delta, exact Wilcoxon signed-rank,
Benjamini-Hochberg FDR, bootstrap percentile intervals."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm, rankdata

from ..errors import ValidationError
from ..rng import rng_for

WILCOXON_EXACT_MAX_N = 25


def cliffs_delta(x, y) -> float:
    """(#{x > y} - #{x < y}) / (n m), in [-1, 1]."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ValidationError("cliffs_delta needs nonempty samples")
    # rank-based O((n+m) log(n+m)) count of greater/less pairs
    ys = np.sort(y)
    greater = np.searchsorted(ys, x, side="left").sum()
    less_or_eq = np.searchsorted(ys, x, side="right").sum()
    less = y.size * x.size - less_or_eq
    return float((int(greater) - int(less)) / (x.size * y.size))


def _exact_wilcoxon_p(ranks2, w2):
    """Two-sided exact p for doubled ranks (integers) and doubled W+."""
    total = int(ranks2.sum())
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in ranks2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r] if r > 0 else counts
        counts = counts + shifted
    n_patterns = counts.sum()
    lo = counts[: w2 + 1].sum() / n_patterns
    hi = counts[w2:].sum() / n_patterns
    return min(1.0, 2.0 * min(lo, hi))


def wilcoxon_signed_rank(diffs) -> float:
    """Two-sided signed-rank p; exact for n <= 25, normal approximation
    with continuity and tie corrections above."""
    d = np.asarray(diffs, dtype=float).ravel()
    d = d[d != 0.0]
    if d.size == 0:
        raise ValidationError("all differences are zero")
    if d.size < 5:
        raise ValidationError("need at least 5 nonzero differences")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    n = d.size
    if n <= WILCOXON_EXACT_MAX_N:
        ranks2 = np.round(2.0 * ranks).astype(int)
        w2 = int(round(2.0 * w_plus))
        return _exact_wilcoxon_p(ranks2, w2)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(((tie_counts**3 - tie_counts) / 2.0).sum())
    var = (n * (n + 1) * (2 * n + 1) - tie_term) / 24.0
    z = (w_plus - mean - 0.5 * np.sign(w_plus - mean)) / np.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(abs(z))))


def bh_fdr(pvals):
    """Benjamini-Hochberg step-up adjusted p-values (monotone, capped)."""
    p = np.asarray(pvals, dtype=float).ravel()
    if p.size == 0:
        return np.array([])
    if np.any(p <= 0) or np.any(p > 1):
        raise ValidationError("p-values must lie in (0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 1.0
    for rank_from_top in range(m - 1, -1, -1):
        i = order[rank_from_top]
        running = min(running, p[i] * m / (rank_from_top + 1))
        adjusted[i] = running
    return adjusted


def bootstrap_ci(stat_fn, samples, reps=1000, level=0.95, seed=0):
    """Seeded percentile bootstrap interval for stat_fn(samples)."""
    X = np.asarray(samples)
    if X.shape[0] < 10:
        raise ValidationError("bootstrap needs at least 10 samples")
    if reps < 2:
        raise ValidationError("insufficient resamples")
    if not 0 < level < 1:
        raise ValidationError("level must lie in (0, 1)")
    rng = rng_for(seed, "bootstrap")
    stats = np.empty(reps)
    n = X.shape[0]
    for r in range(reps):
        stats[r] = stat_fn(X[rng.integers(0, n, size=n)])
    alpha = (1.0 - level) / 2.0
    return float(np.quantile(stats, alpha)), float(np.quantile(stats, 1.0 - alpha))
