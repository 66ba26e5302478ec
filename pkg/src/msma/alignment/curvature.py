"""Curvature regularizer: sum_i K_i^2 dV_i over local quadratic fits.

For each point, the k-NN neighborhood is split into a tangent frame
(local PCA, `local_dim` directions) and normal directions; every normal
coordinate is regressed on a quadratic in the tangent coordinates.
K_i is the Frobenius norm of the fitted second-order (Hessian) terms, a
finite-difference curvature proxy, and dV_i is the volume of the k-NN
ball in the tangent dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaln

from ..errors import ValidationError


@dataclass
class CurvatureResult:
    value: float
    point_curvature: np.ndarray  # K_i
    point_volume: np.ndarray  # dV_i

    def __float__(self):
        return self.value


def _unit_ball_volume(m):
    return float(np.exp(0.5 * m * np.log(np.pi) - gammaln(0.5 * m + 1.0)))


def _quad_design(u):
    m, t = u.shape
    cols = [np.ones((m, 1)), u]
    weights = []
    for p in range(t):
        for q in range(p, t):
            cols.append((u[:, p] * u[:, q])[:, None])
            weights.append(4.0 if p == q else 2.0)  # ||H||_F^2 weights
    return np.hstack(cols), np.array(weights)


def _neighborhood_geometry(nb, local_dim, ridge_scale=1e-9):
    """Stop-gradient geometry of one neighborhood: tangent/normal frames
    and the ridge pseudo-inverse of the quadratic design."""
    mu = nb.mean(axis=0)
    C = nb - mu
    _, svals, Vt = np.linalg.svd(C, full_matrices=True)
    spread = float(svals[0]) if svals.size else 0.0
    if spread <= 0.0:
        raise ValidationError("degenerate neighborhood: zero spread")
    T = Vt[:local_dim].T
    N = Vt[local_dim:].T
    u = C @ T
    phi, w_quad = _quad_design(u)
    ridge = ridge_scale * max(spread**2, 1e-30)
    pinv = np.linalg.solve(phi.T @ phi + ridge * np.eye(phi.shape[1]), phi.T)
    return mu, T, N, phi, pinv, w_quad


def curvature_penalty(points, k_nn=10, local_dim=2) -> CurvatureResult:
    """sum_i K_i^2 dV_i for the cloud; see module docstring."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2:
        raise ValidationError("points must be 2-D [n x d]")
    n, d = P.shape
    if not (n > k_nn >= local_dim + 2):
        raise ValidationError(f"need n > k_nn >= local_dim + 2, got n={n}, k_nn={k_nn}")
    local_dim = min(local_dim, d)
    n_quad = local_dim * (local_dim + 1) // 2

    tree = cKDTree(P)
    dist, idx = tree.query(P, k=k_nn + 1)
    K = np.zeros(n)
    dV = _unit_ball_volume(local_dim) * dist[:, -1] ** local_dim
    if d > local_dim:
        for i in range(n):
            nb = P[idx[i]]
            _, _, N, phi, pinv, w_quad = _neighborhood_geometry(nb, local_dim)
            z = (nb - nb.mean(axis=0)) @ N
            coef = pinv @ z
            quad = coef[1 + local_dim:]
            K[i] = np.sqrt(float((w_quad[:, None] * quad**2).sum())) if n_quad else 0.0
    value = float((K**2 * dV).sum())
    return CurvatureResult(value=value, point_curvature=K, point_volume=dV)


def curvature_with_grad(points, k_nn=10, local_dim=2):
    """(value, d value / d points) with the neighborhood geometry treated
    as fixed (stop-gradient); the response values stay differentiable.

    Used by the training loop; the full penalty above is the reporting
    path.
    """
    P = np.asarray(points, dtype=float)
    n, d = P.shape
    if not (n > k_nn >= local_dim + 2):
        raise ValidationError(f"need n > k_nn >= local_dim + 2, got n={n}, k_nn={k_nn}")
    local_dim = min(local_dim, d)
    grad = np.zeros_like(P)
    if d <= local_dim:
        return 0.0, grad
    tree = cKDTree(P)
    dist, idx = tree.query(P, k=k_nn + 1)
    dV = _unit_ball_volume(local_dim) * dist[:, -1] ** local_dim
    total = 0.0
    m = k_nn + 1
    center = np.eye(m) - 1.0 / m
    for i in range(n):
        nb = P[idx[i]]
        _, _, N, phi, pinv, w_quad = _neighborhood_geometry(nb, local_dim)
        z = center @ nb @ N
        coef = pinv @ z
        quad = coef[1 + local_dim:]
        total += dV[i] * float((w_quad[:, None] * quad**2).sum())
        d_quad = 2.0 * dV[i] * w_quad[:, None] * quad
        d_z = pinv[1 + local_dim:].T @ d_quad
        d_nb = center.T @ d_z @ N.T
        np.add.at(grad, idx[i], d_nb)
    return float(total), grad
