"""Deterministic seed derivation.

Every stochastic routine in the package takes an explicit integer seed.
Sub-seeds are derived by hashing the parent seed together with string
tags, so parallel workers get independent streams that do not depend on
scheduling order.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def child_seed(seed: int, *tags) -> int:
    """Fold `tags` into `seed`, returning a new 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & _MASK64).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *tags) -> np.random.Generator:
    """Generator seeded from (seed, *tags)."""
    return np.random.default_rng(child_seed(seed, *tags) if tags else int(seed) & _MASK64)
