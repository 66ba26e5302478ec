"""Error-additivity check on a constructed Gaussian Markov chain,
plus the information-bottleneck diagnostic."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..estimators.gaussian import fit_gaussian, gaussian_kl
from ..estimators.ksg import ksg_mi
from ..rng import child_seed, rng_for


def _orthogonal(rng, d):
    return np.linalg.qr(rng.normal(size=(d, d)))[0]


def error_additivity_check(stage_kls=(0.1, 0.2), dim=4, n_samples=40000,
                           noise=(0.5, 0.5), seed=0):
    """Compose planted per-stage map errors on a Gaussian chain
    h_G -> h_I -> h_L and compare the joint KL against the stage sum.

    Each aligned map is the true conditional mean plus a perturbation
    sized analytically so its expected conditional KL equals the planted
    value. The total is measured on sampled data with Gaussian fits.
    Returns stage KLs, the measured total, and their ratio.
    """
    if len(stage_kls) != 2:
        raise ValidationError("stage_kls must have two entries (G->I, I->L)")
    rng = rng_for(seed, "additivity")
    s1, s2 = noise
    A = _orthogonal(rng, dim)
    B = _orthogonal(rng, dim)

    # perturbation direction with unit Frobenius norm
    D1 = rng.normal(size=(dim, dim))
    D1 /= np.linalg.norm(D1)
    D2 = rng.normal(size=(dim, dim))
    D2 /= np.linalg.norm(D2)

    sigma_g = np.eye(dim)
    sigma_i = A @ sigma_g @ A.T + s1**2 * np.eye(dim)

    # E KL(p(h_I|h_G) || q) = tr(D Sigma D') delta^2 / (2 s^2) for mean
    # perturbation delta * D h; solve delta for the planted stage KL
    def solve_delta(D, sigma_in, s, target):
        quad = float(np.trace(D @ sigma_in @ D.T))
        return np.sqrt(2.0 * target * s**2 / quad)

    d1 = solve_delta(D1, sigma_g, s1, stage_kls[0])
    d2 = solve_delta(D2, sigma_i, s2, stage_kls[1])
    A_hat = A + d1 * D1
    B_hat = B + d2 * D2

    hG = rng.normal(size=(n_samples, dim))
    e1 = s1 * rng.normal(size=(n_samples, dim))
    e2 = s2 * rng.normal(size=(n_samples, dim))
    hI = hG @ A.T + e1
    hL = hI @ B.T + e2
    # aligned chain reuses the same innovation noise; only the maps differ
    hI_a = hG @ A_hat.T + e1
    hL_a = hI_a @ B_hat.T + e2

    joint_true = np.hstack([hG, hI, hL])
    joint_aligned = np.hstack([hG, hI_a, hL_a])
    total = gaussian_kl(fit_gaussian(joint_true, shrinkage=0.0),
                        fit_gaussian(joint_aligned, shrinkage=0.0))
    stage_sum = float(sum(stage_kls))
    return {
        "stage_kls": [float(k) for k in stage_kls],
        "stage_sum": stage_sum,
        "total_kl": float(total),
        "ratio": float(total / stage_sum) if stage_sum > 0 else 0.0,
    }


def ib_objective_estimate(h1, h2, y, beta, seed=0):
    """I(h2; y) - beta I(h1; h2) with KSG, labels one-hot embedded.

    Diagnostic for the bottleneck trade-off; not a training objective.
    """
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    y = np.asarray(y)
    if y.ndim == 1:
        classes = np.unique(y)
        onehot = np.zeros((y.shape[0], classes.size))
        onehot[np.arange(y.shape[0]), np.searchsorted(classes, y)] = 1.0
    else:
        onehot = y.astype(float)
    i_target = ksg_mi(h2, onehot, seed=child_seed(seed, "ib-target")).mi
    i_pair = ksg_mi(h1, h2, seed=child_seed(seed, "ib-pair")).mi
    return float(i_target - beta * i_pair)
