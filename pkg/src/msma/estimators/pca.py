"""PCA projection used to reduce representations before MI/KL estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray  # [k x d], orthonormal rows
    explained_variance: np.ndarray  # [k], descending

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) @ self.components.T


def pca_fit(X, k) -> PcaBasis:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError("X must be 2-D [n x d]")
    n, d = X.shape
    if not 1 <= k <= min(n, d):
        raise ValidationError(f"k={k} out of range for n={n}, d={d}")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    comps = vt[:k]
    # deterministic sign: largest-magnitude loading positive
    for row in comps:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1.0
    var = (s[:k] ** 2) / max(n - 1, 1)
    return PcaBasis(mean=mean, components=comps, explained_variance=var)


def pca_reduce(X, k):
    """Project X to its top-k principal subspace.

    Returns (reduced [n x k], PcaBasis). Columns are ordered by
    descending explained variance; the basis rows are orthonormal.
    """
    basis = pca_fit(X, k)
    return basis.transform(X), basis


def reduce_dim(X, k=50):
    """PCA to at most k dimensions, clamped to min(n - 1, d).

    Identity passthrough when the data already has <= k columns.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    k_eff = min(k, n - 1, d)
    if d <= k_eff:
        return X
    reduced, _ = pca_reduce(X, k_eff)
    return reduced
