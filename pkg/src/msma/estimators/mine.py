"""MINE: neural mutual-information lower bound (Donsker-Varadhan form).

The critic scores joint pairs against marginal (shuffled) pairs; the
bound is E_joint[T] - log E_marg[e^T]. The running mean of e^T corrects
the biased gradient of the log-denominator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDivergedError, ValidationError
from ..nnet import MLP, Adam
from ..rng import rng_for

_T_CLIP = 50.0  # keeps exp(T) finite; generous vs any realistic bound


@dataclass
class MineResult:
    mi: float  # EMA-smoothed lower bound at the end of training
    trace: np.ndarray  # per-step instantaneous bound

    def __float__(self):
        return self.mi


class MineCritic:
    """2x128 ReLU scorer with its own Adam state and EMA denominator."""

    def __init__(self, dim_x, dim_y, hidden=128, lr=1e-4, ema_rate=0.01, seed=0):
        self.net = MLP([dim_x + dim_y, hidden, hidden, 1], activation="relu", seed=seed)
        self.opt = Adam(self.net.params, lr=lr)
        self.ema_rate = ema_rate
        self.ema_et = None  # running E_marg[e^T]
        self.ema_tj = None  # running E_joint[T]

    def score(self, x, y):
        return self.net(np.hstack([x, y]))[:, 0]

    def step(self, x_joint, y_joint, x_marg, y_marg):
        """One critic update; returns the instantaneous bound.

        Also exposes input gradients (d bound / d y inputs) on
        self.last_input_grads for callers that train a map jointly.
        """
        b = x_joint.shape[0]
        tj, cache_j = self.net.forward(np.hstack([x_joint, y_joint]))
        tm, cache_m = self.net.forward(np.hstack([x_marg, y_marg]))
        tj = tj[:, 0]
        tm = np.minimum(tm[:, 0], _T_CLIP)
        et = np.exp(tm)
        mean_et = float(et.mean())
        if self.ema_et is None:
            self.ema_et = mean_et
            self.ema_tj = float(tj.mean())
        else:
            self.ema_et += self.ema_rate * (mean_et - self.ema_et)
            self.ema_tj += self.ema_rate * (float(tj.mean()) - self.ema_tj)
        with np.errstate(divide="ignore"):
            bound = float(tj.mean() - np.log(mean_et))
        if not np.isfinite(bound):
            raise TrainingDivergedError("MINE bound became non-finite")

        # maximize bound => minimize -bound; d(-bound)/dT
        g_j = np.full((b, 1), -1.0 / b)
        g_m = (et / (b * max(self.ema_et, 1e-300)))[:, None]
        dx_j, grads_j = self.net.backward(g_j, cache_j)
        dx_m, grads_m = self.net.backward(g_m, cache_m)
        self.opt.step([a + b_ for a, b_ in zip(grads_j, grads_m)])
        self.last_input_grads = (dx_j, dx_m)
        return bound

    @property
    def smoothed_bound(self):
        if self.ema_et is None:
            return 0.0
        return float(self.ema_tj - np.log(self.ema_et))

    def input_grads(self, x_joint, y_joint, x_marg, y_marg):
        """Gradients of (-bound) wrt the y inputs, critic params frozen.

        Returns (bound, d_y_joint, d_y_marg); used when a map is trained
        through the critic.
        """
        b = x_joint.shape[0]
        tj, cache_j = self.net.forward(np.hstack([x_joint, y_joint]))
        tm, cache_m = self.net.forward(np.hstack([x_marg, y_marg]))
        tm_c = np.minimum(tm[:, 0], _T_CLIP)
        et = np.exp(tm_c)
        denom = self.ema_et if self.ema_et is not None else float(et.mean())
        bound = float(tj[:, 0].mean() - np.log(max(float(et.mean()), 1e-300)))
        g_j = np.full((b, 1), -1.0 / b)
        g_m = (et / (b * max(denom, 1e-300)))[:, None]
        dx_j, _ = self.net.backward(g_j, cache_j)
        dx_m, _ = self.net.backward(g_m, cache_m)
        dy = y_joint.shape[1]
        return bound, dx_j[:, -dy:], dx_m[:, -dy:]


def mine_estimate(
    X,
    Y,
    hidden=128,
    steps=2000,
    batch=128,
    lr=1e-4,
    ema_rate=0.01,
    seed=0,
) -> MineResult:
    """Train a MINE critic on (X, Y) and return the smoothed lower bound."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ValidationError("X and Y must have the same number of samples")
    if n < 256:
        raise ValidationError("mine_estimate needs n >= 256 samples")

    rng = rng_for(seed, "mine-batches")
    critic = MineCritic(X.shape[1], Y.shape[1], hidden=hidden, lr=lr, ema_rate=ema_rate, seed=seed)
    trace = np.empty(steps)
    try:
        for t in range(steps):
            idx = rng.integers(0, n, size=batch)
            idx_m = rng.integers(0, n, size=batch)
            trace[t] = critic.step(X[idx], Y[idx], X[idx], Y[idx_m])
    except TrainingDivergedError as err:
        err.trace = trace[: t]
        raise
    return MineResult(mi=critic.smoothed_bound, trace=trace)
