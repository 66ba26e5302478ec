"""Parallel classifier heads over the three scale representations.

Linear heads: global (plain softmax), intermediate (softmax with
temperature), local (label smoothing). The joint classification loss is
the unweighted mean of the three cross-entropies.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..rng import rng_for

DEFAULT_HEAD_DIMS = (62, 3, 3)  # global / intermediate / local logits
SCALE_ORDER = ("global", "intermediate", "local")


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class ClassifierHeads:
    """Three linear heads; parameters [Wg, bg, Wm, bm, Wl, bl]."""

    def __init__(self, input_dim, dims=DEFAULT_HEAD_DIMS, temperature=2.0,
                 label_smoothing=0.1, seed=0, init_scale=0.0):
        if len(dims) != 3 or any(k < 2 for k in dims):
            raise ValidationError("head dims must be three class counts >= 2")
        if temperature <= 0:
            raise ValidationError("temperature must be positive")
        if not 0.0 <= label_smoothing < 1.0:
            raise ValidationError("label smoothing must lie in [0, 1)")
        self.dims = tuple(int(k) for k in dims)
        self.temperature = temperature
        self.label_smoothing = label_smoothing
        rng = rng_for(seed, "heads-init")
        self.params = []
        for k in self.dims:
            W = init_scale * rng.normal(size=(input_dim, k)) if init_scale else np.zeros((input_dim, k))
            self.params.append(W)
            self.params.append(np.zeros(k))

    def _head(self, which):
        i = SCALE_ORDER.index(which)
        return self.params[2 * i], self.params[2 * i + 1]

    def logits(self, which, h):
        W, b = self._head(which)
        z = np.asarray(h, dtype=float) @ W + b
        if which == "intermediate":
            z = z / self.temperature
        return z

    def _targets(self, which, y, k):
        t = np.zeros((y.shape[0], k))
        t[np.arange(y.shape[0]), y] = 1.0
        if which == "local" and self.label_smoothing > 0:
            t = (1.0 - self.label_smoothing) * t + self.label_smoothing / k
        return t

    def loss_and_grads(self, reps, labels):
        """L_cls = mean of the three cross-entropies.

        reps/labels: dicts keyed by scale name. Returns (loss, grads,
        per_head) with grads shaped like self.params.
        """
        grads = [np.zeros_like(p) for p in self.params]
        per_head = {}
        total = 0.0
        for i, which in enumerate(SCALE_ORDER):
            h = np.asarray(reps[which], dtype=float)
            y = np.asarray(labels[which])
            k = self.dims[i]
            if y.min() < 0 or y.max() >= k:
                raise ValidationError(f"{which} labels exceed head dimension {k}")
            n = h.shape[0]
            z = self.logits(which, h)
            p = _softmax(z)
            t = self._targets(which, y, k)
            ce = float(-(t * np.log(np.clip(p, 1e-12, None))).sum() / n)
            per_head[which] = ce
            total += ce
            dz = (p - t) / n
            if which == "intermediate":
                dz = dz / self.temperature
            grads[2 * i] += h.T @ dz / 3.0
            grads[2 * i + 1] += dz.sum(axis=0) / 3.0
        return total / 3.0, grads, per_head
