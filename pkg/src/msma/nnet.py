"""Minimal feed-forward nets with hand-written backprop, plus Adam.

Everything here is plain numpy so every gradient is analytic and
checkable against central finite differences. Parameters live in flat
lists of arrays (W0, b0, W1, b1, ...) shared by reference with the
optimizer.
"""

from __future__ import annotations

import numpy as np

from .rng import rng_for


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, z, a):
    # derivative wrt z given pre-activation z and activation a
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    raise ValueError(f"unknown activation {name!r}")


class MLP:
    """Fully connected net: linear output, fixed hidden activation."""

    def __init__(self, sizes, activation="relu", seed=0, init_scale=None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output size")
        self.sizes = list(sizes)
        self.activation = activation
        rng = rng_for(seed, "mlp-init")
        self.params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if init_scale is not None:
                scale = init_scale
            elif activation == "relu":
                scale = np.sqrt(2.0 / fan_in)
            else:
                scale = np.sqrt(1.0 / fan_in)
            self.params.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))

    @property
    def n_layers(self):
        return len(self.sizes) - 1

    def forward(self, x):
        """Return (output, cache) where cache feeds backward()."""
        x = np.asarray(x, dtype=float)
        pre, post = [], [x]
        h = x
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            z = h @ W + b
            pre.append(z)
            h = z if i == self.n_layers - 1 else _act(self.activation, z)
            post.append(h)
        return h, (pre, post)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, dout, cache):
        """Backprop dout through the cached pass.

        Returns (dx, grads) with grads shaped like self.params.
        """
        pre, post = cache
        grads = [np.zeros_like(p) for p in self.params]
        g = np.asarray(dout, dtype=float)
        for i in reversed(range(self.n_layers)):
            if i != self.n_layers - 1:
                g = g * _act_grad(self.activation, pre[i], post[i + 1])
            grads[2 * i] = post[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.params[2 * i].T
        return g, grads

    def copy(self):
        other = MLP.__new__(MLP)
        other.sizes = list(self.sizes)
        other.activation = self.activation
        other.params = [p.copy() for p in self.params]
        return other


class Adam:
    """Standard Adam with bias correction; updates params in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / (1.0 - b1**self.t)
            v_hat = self.v[i] / (1.0 - b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def numerical_grad(f, arr, eps=1e-6):
    """Central-difference gradient of scalar f wrt arr (modified in place
    during probing, restored afterwards)."""
    g = np.zeros_like(arr, dtype=float)
    flat = arr.reshape(-1)
    gflat = g.reshape(-1)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + eps
        hi = f()
        flat[j] = orig - eps
        lo = f()
        flat[j] = orig
        gflat[j] = (hi - lo) / (2.0 * eps)
    return g
