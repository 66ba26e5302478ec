"""Pool layer ranges into per-scale representations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass
class ScaleRepresentation:
    h_global: np.ndarray  # [n x d]
    h_intermediate: np.ndarray
    h_local: np.ndarray
    ranges: dict  # scale -> (first_layer, last_layer), 1-based inclusive

    @property
    def n_samples(self):
        return self.h_global.shape[0]


def pool_scales(stack, boundaries) -> ScaleRepresentation:
    """Mean-pool hidden states over the ranges [1,l1], (l1,l2], (l2,L].

    boundaries may be an (l1, l2) pair or a BoundaryResult.
    """
    l1, l2 = (boundaries.l1, boundaries.l2) if hasattr(boundaries, "l1") else boundaries
    L = stack.n_layers
    if not (1 <= l1 < l2 <= L):
        raise ValidationError(f"boundaries ({l1}, {l2}) violate 1 <= l1 < l2 <= {L}")
    ranges = {
        "local": (1, l1),
        "intermediate": (l1 + 1, l2),
        "global": (l2 + 1, L),
    }
    for scale, (a, b) in ranges.items():
        if a > b:
            raise ValidationError(f"empty {scale} range ({a}, {b}) for boundaries ({l1}, {l2})")

    def pool(a, b):
        return np.mean([np.asarray(stack.hidden[i - 1], dtype=float) for i in range(a, b + 1)], axis=0)

    return ScaleRepresentation(
        h_global=pool(*ranges["global"]),
        h_intermediate=pool(*ranges["intermediate"]),
        h_local=pool(*ranges["local"]),
        ranges=ranges,
    )
