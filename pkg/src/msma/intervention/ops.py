"""Representation-space intervention operators.

Hidden-state kinds: translate (h + delta), scale (alpha h), noise
(h + sigma N(0, I), seeded). The attention kind applies a row-wise
temperature: A' = A^(1/tau) renormalized, which sharpens for tau < 1,
flattens for tau > 1, and is the identity at tau = 1. Identity
parameters return the input bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..estimators.pca import pca_fit
from ..rng import rng_for

SCALES = ("local", "intermediate", "global")
KINDS = ("translate", "scale", "noise", "attention")


@dataclass
class InterventionSpec:
    scale: str
    kind: str
    delta: np.ndarray = None  # translate; None -> top-PC direction x magnitude
    alpha: float = 1.0  # scale factor
    sigma: float = 0.0  # noise std
    tau: float = 1.0  # attention temperature
    magnitude: float = 1.0  # length of the default translate delta
    seed: int = 0

    def __post_init__(self):
        if self.scale not in SCALES:
            raise ValidationError(f"scale must be one of {SCALES}")
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}")
        if self.sigma < 0:
            raise ValidationError("sigma must be >= 0")
        if self.alpha <= 0:
            raise ValidationError("alpha must be > 0")
        if self.tau <= 0:
            raise ValidationError("tau must be > 0")
        if self.delta is not None:
            self.delta = np.asarray(self.delta, dtype=np.float32)


def resolve_layers(scale, boundaries, n_layers):
    """1-based layers of the targeted scale range."""
    l1, l2 = (boundaries.l1, boundaries.l2) if hasattr(boundaries, "l1") else boundaries
    if not (1 <= l1 < l2 <= n_layers):
        raise ValidationError(f"boundaries ({l1}, {l2}) invalid for L={n_layers}")
    ranges = {"local": (1, l1), "intermediate": (l1 + 1, l2), "global": (l2 + 1, n_layers)}
    a, b = ranges[scale]
    if a > b:
        raise ValidationError(f"{scale} range empty for boundaries ({l1}, {l2})")
    return list(range(a, b + 1))


def apply_intervention(tensor, spec: InterventionSpec):
    """Perturb one hidden matrix [n x d] or attention tensor [... x s x s]."""
    T = np.asarray(tensor)
    if spec.kind == "attention":
        if T.ndim < 3 or T.shape[-1] != T.shape[-2]:
            raise ValidationError("attention intervention needs a [... x s x s] tensor")
        if spec.tau == 1.0:
            return T.copy()
        powed = np.power(np.clip(T, 0.0, None), 1.0 / spec.tau)
        sums = powed.sum(axis=-1, keepdims=True)
        sums[sums == 0.0] = 1.0
        return (powed / sums).astype(T.dtype)
    if T.ndim != 2:
        raise ValidationError("hidden intervention needs a [n x d] matrix")
    if spec.kind == "translate":
        if spec.delta is None:
            raise ValidationError("translate needs delta (or resolve it via apply_to_stack)")
        if spec.delta.shape != (T.shape[1],):
            raise ValidationError(
                f"delta has dimension {spec.delta.shape}, expected ({T.shape[1]},)"
            )
        if not spec.delta.any():
            return T.copy()
        return (T + spec.delta[None, :]).astype(T.dtype)
    if spec.kind == "scale":
        if spec.alpha == 1.0:
            return T.copy()
        return (T * spec.alpha).astype(T.dtype)
    # noise
    if spec.sigma == 0.0:
        return T.copy()
    eta = rng_for(spec.seed, "intervention-noise").normal(size=T.shape)
    return (T + spec.sigma * eta).astype(T.dtype)


def default_delta(stack, spec: InterventionSpec, boundaries):
    """Unit top-principal-component of the pooled scale representation,
    scaled by spec.magnitude."""
    from ..alignment.pooling import pool_scales

    scales = pool_scales(stack, boundaries)
    rep = {
        "local": scales.h_local,
        "intermediate": scales.h_intermediate,
        "global": scales.h_global,
    }[spec.scale]
    basis = pca_fit(rep, 1)
    return (spec.magnitude * basis.components[0]).astype(np.float32)


def apply_to_stack(stack, spec: InterventionSpec, boundaries):
    """New LayerStack with the targeted layer range perturbed."""
    from ..repr_store.stack import LayerStack

    layers = resolve_layers(spec.scale, boundaries, stack.n_layers)
    if spec.kind == "translate" and spec.delta is None:
        spec = InterventionSpec(
            scale=spec.scale, kind=spec.kind,
            delta=default_delta(stack, spec, boundaries),
            alpha=spec.alpha, sigma=spec.sigma, tau=spec.tau,
            magnitude=spec.magnitude, seed=spec.seed,
        )
    hidden = list(stack.hidden)
    attention = list(stack.attention) if stack.attention is not None else None
    for layer in layers:
        if spec.kind == "attention":
            if attention is None:
                raise ValidationError("stack has no attention tensors to intervene on")
            attention[layer - 1] = apply_intervention(attention[layer - 1], spec)
        else:
            sub = InterventionSpec(
                scale=spec.scale, kind=spec.kind, delta=spec.delta,
                alpha=spec.alpha, sigma=spec.sigma, tau=spec.tau,
                magnitude=spec.magnitude, seed=int(spec.seed) + layer,
            )
            hidden[layer - 1] = apply_intervention(hidden[layer - 1], sub)
    out = LayerStack(
        hidden=hidden, attention=attention, labels=stack.labels, manifest=dict(stack.manifest)
    )
    return out.validate()
