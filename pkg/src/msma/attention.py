"""Per-layer attention span and entropy profiles.

Mean span is the attention-weighted |i - j| averaged over heads and
query positions. The per-query normalization keeps the number in token
units (and in the 12-36 range seen on 12-layer models) instead of
scaling with sequence length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from .errors import ValidationError

_ROW_TOL = 1e-4


@dataclass
class AttentionProfile:
    span: np.ndarray  # [L] mean span per layer
    entropy: np.ndarray  # [L] mean row entropy per layer, nats
    delta_span: np.ndarray  # [L-1], delta_span[i] = span[i+1] - span[i]
    head_spans: np.ndarray  # [L x H] per-head spans (heatmap input)
    spearman_span_depth: float

    @property
    def n_layers(self):
        return len(self.span)


def _check_attention(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 3 or A.shape[-1] != A.shape[-2]:
        raise ValidationError("attention must be [heads x seq x seq]")
    if np.any(A < 0):
        raise ValidationError("attention has negative entries")
    sums = A.sum(axis=-1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > _ROW_TOL:
        raise ValidationError(f"attention rows not stochastic (worst deviation {worst:.2e})")
    return A


def _per_head_spans(A):
    n = A.shape[-1]
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :])
    return (A * dist).sum(axis=(-1, -2)) / n


def mean_span(A) -> float:
    """(1 / (H n)) sum_h sum_ij A_ij |i - j| for one layer."""
    A = _check_attention(A)
    return float(_per_head_spans(A).mean())


def attention_entropy(A) -> float:
    """Mean Shannon row entropy (nats) over heads and rows; 0 log 0 = 0."""
    A = _check_attention(A)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(A > 0, A * np.log(A), 0.0)
    return float(-terms.sum(axis=-1).mean())


def profile_stack(stack) -> AttentionProfile:
    """Span/entropy/delta-span profile over all layers of a stack."""
    if stack.attention is None:
        raise ValidationError("stack has no attention tensors")
    L = stack.n_layers
    span = np.empty(L)
    entropy = np.empty(L)
    head_spans = []
    for layer in range(1, L + 1):
        A = _check_attention(stack.averaged_attention(layer))
        hs = _per_head_spans(A)
        head_spans.append(hs)
        span[layer - 1] = float(hs.mean())
        entropy[layer - 1] = attention_entropy(A)
    if L > 2 and np.ptp(span) > 0:
        rho = spearmanr(span, np.arange(1, L + 1)).statistic
    else:
        rho = 0.0
    return AttentionProfile(
        span=span,
        entropy=entropy,
        delta_span=np.diff(span),
        head_spans=np.array(head_spans),
        spearman_span_depth=float(rho),
    )
