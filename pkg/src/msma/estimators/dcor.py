"""Szekely distance correlation (double-centered V-statistic)."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ..errors import ValidationError
from ..rng import rng_for


def _double_center(D):
    row = D.mean(axis=1, keepdims=True)
    col = D.mean(axis=0, keepdims=True)
    return D - row - col + D.mean()


def distance_correlation(X, Y, max_n=2000, seed=0) -> float:
    """Distance correlation in [0, 1]; subsampled to max_n when larger.

    The O(n^2) distance matrices cap memory, hence the seeded
    without-replacement subsample for big inputs.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ValidationError("X and Y must have the same number of samples")
    if n < 4:
        raise ValidationError("distance correlation needs n >= 4")
    if n > max_n:
        idx = rng_for(seed, "dcor-subsample").choice(n, size=max_n, replace=False)
        idx.sort()
        X, Y = X[idx], Y[idx]

    A = _double_center(squareform(pdist(X)))
    B = _double_center(squareform(pdist(Y)))
    dcov2 = float((A * B).mean())
    dvar_x = float((A * A).mean())
    dvar_y = float((B * B).mean())
    denom = np.sqrt(dvar_x * dvar_y)
    if denom <= 0.0:
        return 0.0
    val = np.sqrt(max(dcov2, 0.0) / denom)
    return float(min(max(val, 0.0), 1.0))
