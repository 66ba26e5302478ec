"""Cross-scale alignment maps: linear, orthogonal Procrustes, MLP.

Every map supports apply(); the trainable kinds (linear, mlp) also
expose params / backward for the Adam loop in training.py. A MINE
critic gets attached as `.critic` during joint training, carrying the
information component of the mapping.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..nnet import MLP


def _rect_eye(d_in, d_out):
    W = np.zeros((d_in, d_out))
    np.fill_diagonal(W, 1.0)
    return W


@dataclass
class LinearMap:
    W: np.ndarray  # [d_src x d_dst]
    critic: object = None
    kind: str = field(default="linear", init=False)

    @classmethod
    def identity(cls, d_src, d_dst):
        return cls(W=_rect_eye(d_src, d_dst))

    @property
    def params(self):
        return [self.W]

    def apply(self, X):
        return np.asarray(X, dtype=float) @ self.W

    def backward(self, X, d_out):
        """Returns param grads given d L / d mapped."""
        return [np.asarray(X, dtype=float).T @ d_out]


@dataclass
class ProcrustesMap:
    Q: np.ndarray  # orthogonal [d x d]
    scale: float
    offset: np.ndarray  # [d]
    critic: object = None
    kind: str = field(default="procrustes", init=False)

    def apply(self, X):
        return self.scale * (np.asarray(X, dtype=float) @ self.Q) + self.offset


class MlpMap:
    """Residual MLP map: x @ S + mlp(x), identity at init (S = I, out = 0)."""

    kind = "mlp"

    def __init__(self, d_src, d_dst, hidden=None, seed=0):
        hidden = hidden or min(4 * d_src, 512)
        self.skip = _rect_eye(d_src, d_dst)
        self.net = MLP([d_src, hidden, d_dst], activation="tanh", seed=seed)
        self.net.params[-2][:] = 0.0  # zero output weights -> identity map
        self.net.params[-1][:] = 0.0
        self.critic = None

    @property
    def params(self):
        return [self.skip] + self.net.params

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        return X @ self.skip + self.net(X)

    def forward(self, X):
        X = np.asarray(X, dtype=float)
        out, cache = self.net.forward(X)
        return X @ self.skip + out, (X, cache)

    def backward(self, cache, d_out):
        X, net_cache = cache
        _, net_grads = self.net.backward(d_out, net_cache)
        return [X.T @ d_out] + net_grads


def fit_linear_map(src, dst, ridge=0.0) -> LinearMap:
    """W = argmin ||src W - dst||^2 + ridge ||W||^2 (closed form)."""
    X = np.asarray(src, dtype=float)
    Y = np.asarray(dst, dtype=float)
    if X.shape[0] != Y.shape[0]:
        raise ValidationError("src and dst must have the same number of samples")
    if ridge < 0:
        raise ValidationError("ridge must be >= 0")
    gram = X.T @ X + ridge * np.eye(X.shape[1])
    try:
        c, low = np.linalg.cholesky(gram), True
    except np.linalg.LinAlgError:
        if ridge == 0.0:
            raise ValidationError(
                "singular normal equations (n < d_src?); use ridge > 0"
            ) from None
        raise
    from scipy.linalg import cho_solve

    W = cho_solve((c, True), X.T @ Y)
    return LinearMap(W=W)


def fit_procrustes(src, dst) -> ProcrustesMap:
    """Orthogonal map with optimal scale and offset (full orthogonal
    group: reflections permitted)."""
    X = np.asarray(src, dtype=float)
    Y = np.asarray(dst, dtype=float)
    if X.shape != Y.shape:
        raise ValidationError("procrustes needs src and dst of identical shape")
    mu_x, mu_y = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mu_x, Y - mu_y
    M = Xc.T @ Yc
    U, svals, Vt = np.linalg.svd(M)
    if svals[-1] < 1e-12 * max(svals[0], 1.0):
        warnings.warn("rank-deficient cross-covariance; Procrustes solution not unique")
    Q = U @ Vt
    denom = float((Xc * Xc).sum())
    s = float(svals.sum() / denom) if denom > 0 else 1.0
    b = mu_y - s * (mu_x @ Q)
    return ProcrustesMap(Q=Q, scale=s, offset=b)
