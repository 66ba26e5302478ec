import numpy as np
import pytest
from scipy.spatial import cKDTree

from msma.alignment.curvature import (
    _neighborhood_geometry,
    _unit_ball_volume,
    curvature_penalty,
    curvature_with_grad,
)
from msma.errors import ValidationError


def test_plane_is_flat(rng):
    basis = np.linalg.qr(rng.normal(size=(5, 2)))[0]
    points = rng.normal(size=(400, 2)) @ basis.T
    assert curvature_penalty(points).value <= 1e-6


def test_sphere_much_more_curved_than_plane(rng):
    v = rng.normal(size=(400, 3))
    sphere = v / np.linalg.norm(v, axis=1, keepdims=True)
    plane = np.hstack([rng.normal(size=(400, 2)), np.zeros((400, 1))])
    c_sphere = curvature_penalty(sphere).value
    c_plane = curvature_penalty(plane).value
    assert c_sphere > 10 * max(c_plane, 1e-12)


def test_collinear_points_flat():
    line = np.outer(np.linspace(0.0, 1.0, 120), np.array([1.0, 2.0, 0.5, -1.0]))
    assert curvature_penalty(line).value <= 1e-12


def test_degenerate_neighborhood_errors():
    points = np.zeros((30, 3))
    with pytest.raises(ValidationError, match="degenerate neighborhood"):
        curvature_penalty(points)


def test_k_nn_precondition():
    with pytest.raises(ValidationError):
        curvature_penalty(np.random.default_rng(0).normal(size=(50, 3)), k_nn=3, local_dim=2)


def test_gradient_matches_frozen_geometry_fd(rng):
    P = rng.normal(size=(40, 5))
    k_nn, local_dim = 8, 2
    value, grad = curvature_with_grad(P, k_nn=k_nn, local_dim=local_dim)

    tree = cKDTree(P)
    dist, idx = tree.query(P, k=k_nn + 1)
    dV = _unit_ball_volume(local_dim) * dist[:, -1] ** local_dim
    m = k_nn + 1
    center = np.eye(m) - 1.0 / m
    geometry = [_neighborhood_geometry(P[idx[i]], local_dim) for i in range(len(P))]

    def frozen(Q):
        total = 0.0
        for i in range(len(Q)):
            _, _, N, _, pinv, w_quad = geometry[i]
            z = center @ Q[idx[i]] @ N
            quad = (pinv @ z)[1 + local_dim:]
            total += dV[i] * float((w_quad[:, None] * quad**2).sum())
        return total

    assert np.isclose(frozen(P), value)
    eps = 1e-6
    for i, j in [(3, 2), (0, 0), (17, 4), (25, 1), (39, 3)]:
        Q = P.copy()
        Q[i, j] += eps
        hi = frozen(Q)
        Q[i, j] -= 2 * eps
        lo = frozen(Q)
        fd = (hi - lo) / (2 * eps)
        assert abs(fd - grad[i, j]) <= 1e-4 * max(abs(fd), 1.0)
