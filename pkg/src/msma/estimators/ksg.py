"""Kraskov-Stoegbauer-Grassberger (variant 1) mutual information.

k-NN estimator with the Chebyshev (max) norm. Ties are broken by a
seeded uniform jitter of 1e-10 x per-column scale; exact duplicate
joint samples flag the result as near-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from ..errors import ValidationError
from ..rng import rng_for


@dataclass
class KsgResult:
    mi: float  # clamped at >= 0 for reporting
    raw: float
    near_deterministic: bool

    def __float__(self):
        return self.mi


def _as_2d(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise ValidationError(f"{name} must be 1-D or 2-D")
    if not np.isfinite(A).all():
        raise ValidationError(f"{name} contains non-finite entries")
    return A


def ksg_mi(X, Y, k=5, seed=0, jitter=1e-10) -> KsgResult:
    """KSG-1 estimate of I(X; Y) in nats."""
    X = _as_2d(X, "X")
    Y = _as_2d(Y, "Y")
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ValidationError("X and Y must have the same number of samples")
    if not 1 <= k < n:
        raise ValidationError(f"need n > k >= 1, got n={n}, k={k}")

    joint = np.hstack([X, Y])
    # duplicate joint rows make eps degenerate; jitter below resolves it
    uniq = np.unique(joint, axis=0)
    had_duplicates = uniq.shape[0] < n

    rng = rng_for(seed, "ksg-jitter")
    scale = joint.max(axis=0) - joint.min(axis=0)
    scale[scale == 0.0] = 1.0
    joint = joint + rng.uniform(-1.0, 1.0, size=joint.shape) * (jitter * scale)
    Xj = joint[:, : X.shape[1]]
    Yj = joint[:, X.shape[1]:]

    tree_joint = cKDTree(joint)
    # k+1 because the query point itself is returned at distance 0
    eps = tree_joint.query(joint, k=k + 1, p=np.inf)[0][:, -1]

    tree_x = cKDTree(Xj)
    tree_y = cKDTree(Yj)
    r = eps * (1.0 - 1e-12)  # strict inequality
    nx = tree_x.query_ball_point(Xj, r, p=np.inf, return_length=True) - 1
    ny = tree_y.query_ball_point(Yj, r, p=np.inf, return_length=True) - 1

    raw = float(digamma(k) + digamma(n) - np.mean(digamma(nx + 1) + digamma(ny + 1)))
    saturation = digamma(k) + digamma(n) - 2.0 * digamma(k + 1)
    near_det = had_duplicates or raw >= 0.9 * saturation
    return KsgResult(mi=max(raw, 0.0), raw=raw, near_deterministic=bool(near_det))
