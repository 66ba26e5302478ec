"""Gaussian density fits, closed-form KL, and the Fisher local-KL form.

The layerwise distribution model used throughout the toolkit: a
shrinkage-regularized Gaussian fitted to (optionally PCA-reduced)
representations. KL between two such fits is the closed-form Gaussian
divergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from ..errors import ValidationError


@dataclass
class GaussianStats:
    """Mean + shrunk covariance of one sample cloud."""

    mean: np.ndarray
    cov: np.ndarray
    shrinkage: float = 0.0

    @property
    def dim(self):
        return self.mean.shape[0]

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov.shape != (self.dim, self.dim):
            raise ValidationError("cov shape does not match mean dimension")
        if not np.allclose(self.cov, self.cov.T, atol=1e-8):
            raise ValidationError("cov not symmetric to 1e-8")


def fit_gaussian(X, shrinkage=0.05) -> GaussianStats:
    """Fit mean and covariance with trace-scaled shrinkage.

    cov = (1 - s) * C_hat + s * (tr C_hat / d) * I, C_hat unbiased.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError("X must be 2-D [n x d]")
    n, d = X.shape
    if n < 2:
        raise ValidationError("fit_gaussian needs n >= 2 samples")
    if not np.isfinite(X).all():
        raise ValidationError("X contains non-finite entries")
    if not 0.0 <= shrinkage <= 1.0:
        raise ValidationError("shrinkage must lie in [0, 1]")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    cov = 0.5 * (cov + cov.T)
    if shrinkage > 0.0:
        target = (np.trace(cov) / d) * np.eye(d)
        cov = (1.0 - shrinkage) * cov + shrinkage * target
    return GaussianStats(mean=mean, cov=cov, shrinkage=shrinkage)


def gaussian_kl(p: GaussianStats, q: GaussianStats) -> float:
    """Closed-form KL(p || q) in nats; 0 exactly when p == q."""
    if p.dim != q.dim:
        raise ValidationError(f"dimension mismatch: {p.dim} vs {q.dim}")
    d = p.dim
    if np.array_equal(p.mean, q.mean) and np.array_equal(p.cov, q.cov):
        return 0.0
    try:
        Lq = np.linalg.cholesky(q.cov)
    except np.linalg.LinAlgError:
        raise ValidationError("q covariance singular; increase shrinkage") from None
    # tr(Sq^-1 Sp) via triangular solves
    Z = solve_triangular(Lq, p.cov, lower=True)
    Z = solve_triangular(Lq, Z.T, lower=True)
    trace_term = np.trace(Z)
    dm = q.mean - p.mean
    y = solve_triangular(Lq, dm, lower=True)
    maha = float(y @ y)
    sign_p, logdet_p = np.linalg.slogdet(p.cov)
    if sign_p <= 0:
        raise ValidationError("p covariance not positive definite")
    logdet_q = 2.0 * float(np.log(np.diag(Lq)).sum())
    kl = 0.5 * (trace_term + maha - d + logdet_q - logdet_p)
    return max(float(kl), 0.0)


_FAMILIES = ("gaussian_mean", "gaussian_meanvar")


@dataclass
class FisherModel:
    """Parametric family with an analytic Fisher information matrix.

    gaussian_mean: theta = (mu,), sigma fixed via `sigma`.
    gaussian_meanvar: theta = (mu, sigma).
    """

    family: str
    theta: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}")
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        expect = 1 if self.family == "gaussian_mean" else 2
        if self.theta.shape != (expect,):
            raise ValidationError(f"{self.family} needs theta of length {expect}")
        if self.family == "gaussian_meanvar" and self.theta[1] <= 0:
            raise ValidationError("sigma parameter must be positive")
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")

    def fisher(self) -> np.ndarray:
        if self.family == "gaussian_mean":
            return np.array([[1.0 / self.sigma**2]])
        mu, s = self.theta
        return np.array([[1.0 / s**2, 0.0], [0.0, 2.0 / s**2]])

    def exact_kl(self, dtheta) -> float:
        """KL(p_theta || p_{theta+dtheta}) in closed form (1-D Gaussian)."""
        dtheta = np.atleast_1d(np.asarray(dtheta, dtype=float))
        if dtheta.shape != self.theta.shape:
            raise ValidationError("dtheta dimension mismatch")
        if self.family == "gaussian_mean":
            return 0.5 * float(dtheta[0]) ** 2 / self.sigma**2
        mu1, s1 = self.theta
        mu2, s2 = self.theta + dtheta
        if s2 <= 0:
            raise ValidationError("perturbed sigma must stay positive")
        return float(np.log(s2 / s1) + (s1**2 + (mu1 - mu2) ** 2) / (2 * s2**2) - 0.5)


def local_kl_quadratic(model: FisherModel, dtheta) -> float:
    """Second-order KL approximation 0.5 * dtheta' F(theta) dtheta."""
    dtheta = np.atleast_1d(np.asarray(dtheta, dtype=float))
    if dtheta.shape != model.theta.shape:
        raise ValidationError(
            f"dtheta has dimension {dtheta.shape[0]}, expected {model.theta.shape[0]}"
        )
    F = model.fisher()
    return float(0.5 * dtheta @ F @ dtheta)
