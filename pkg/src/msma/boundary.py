"""Boundary detection: fuse attention, MI, and probing evidence.

The boundary score at position l (between layers l and l+1) is
    B_l = alpha * z(dS_l) + beta * z(dI_l) + gamma * z(sum_t w_t |dP_l^t|)
where each channel is z-normalized before weighting because the raw
units (tokens, nats, accuracy) are incommensurable. dI_l is the drop in
adjacent-layer MI across l: I_{l-1,l} - I_{l,l+1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .attention import profile_stack
from .errors import AmbiguousBoundaryError, ValidationError
from .estimators.ksg import ksg_mi
from .estimators.pca import reduce_dim
from .probing import ProbeConfig, probe_stack
from .repr_store.stack import LayerStack
from .rng import child_seed


@dataclass
class BoundaryConfig:
    alpha: float = 0.4  # attention-span channel
    beta: float = 0.4  # mutual-information channel
    gamma: float = 0.2  # probing channel
    task_weights: dict = None  # task -> weight; default uniform
    smoothing_window: int = 3
    min_separation: int = 2
    cv_folds: int = 5
    ksg_k: int = 5
    pca_dim: int = 50
    mi_max_n: int = None  # cap samples per MI estimate
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    cv_probe_seeds: int = 1  # split reshuffles per fold (folds resample anyway)
    seed: int = 0

    def __post_init__(self):
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-9:
            raise ValidationError("channel weights must sum to 1")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValidationError("smoothing window must be odd and >= 1")


@dataclass
class BoundaryResult:
    l1: int
    l2: int
    scores: np.ndarray  # smoothed B_l, index l-1 for l in 1..L-1
    channels: dict  # raw per-channel traces
    cv_std: float
    stable: bool
    cv_boundaries: list


def adjacent_mi_profile(stack, k=5, pca_dim=50, seed=0, full_matrix=False, max_n=None):
    """MI between layer pairs; returns (adjacent profile [L-1], matrix [L x L]).

    Layers are PCA-reduced before estimation. With full_matrix=False only
    the adjacent band is computed; other entries are NaN. max_n caps the
    samples fed to the estimator (seeded subsample) to bound runtime.
    """
    L = stack.n_layers
    if L < 2:
        raise ValidationError("need at least 2 layers")
    hidden = stack.hidden
    if max_n is not None and stack.n_samples > max_n:
        idx = np.sort(
            np.random.default_rng(child_seed(seed, "mi-subsample")).choice(
                stack.n_samples, size=max_n, replace=False
            )
        )
        hidden = [h[idx] for h in hidden]
    reduced = [reduce_dim(np.asarray(h, dtype=float), pca_dim) for h in hidden]
    mat = np.full((L, L), np.nan)
    pairs = (
        [(i, j) for i in range(L) for j in range(i + 1, L)]
        if full_matrix
        else [(i, i + 1) for i in range(L - 1)]
    )
    for i, j in pairs:
        est = ksg_mi(reduced[i], reduced[j], k=k, seed=child_seed(seed, "mi", i, j))
        mat[i, j] = mat[j, i] = est.mi
    profile = np.array([mat[i, i + 1] for i in range(L - 1)])
    return profile, mat


def boundary_scores(delta_span, mi_profile, probe_grads, cfg: BoundaryConfig = None, task_names=None):
    """Fuse the three evidence channels into smoothed scores B_l.

    probe_grads is [L-1 x T]; the probe channel is the weighted sum of
    absolute per-task gradients (any sharp specialization change marks a
    boundary regardless of sign).
    """
    cfg = cfg or BoundaryConfig()
    delta_span = np.asarray(delta_span, dtype=float)
    mi_profile = np.asarray(mi_profile, dtype=float)
    probe_grads = np.atleast_2d(np.asarray(probe_grads, dtype=float))
    m = delta_span.shape[0]
    if mi_profile.shape[0] != m or probe_grads.shape[0] != m:
        raise ValidationError("evidence channels must all have length L-1")

    # adjacent-MI drop across l; undefined at l=1 (no I_{0,1}). Rectified:
    # only drops carry boundary evidence, the rebound right after a drop
    # says nothing about the next position.
    delta_mi = np.zeros(m)
    delta_mi[1:] = np.maximum(mi_profile[:-1] - mi_profile[1:], 0.0)

    if task_names and cfg.task_weights:
        w = np.array([cfg.task_weights.get(t, 1.0) for t in task_names])
    else:
        w = np.ones(probe_grads.shape[1])
    w = w / w.sum()
    probe_channel = np.abs(probe_grads) @ w

    def znorm(v):
        sd = v.std()
        return np.zeros_like(v) if sd < 1e-12 else (v - v.mean()) / sd

    fused = cfg.alpha * znorm(delta_span) + cfg.beta * znorm(delta_mi) + cfg.gamma * znorm(probe_channel)

    # Centered triangular moving average, edge-padded. The center-weighted
    # window keeps a single-position spike at its position (a uniform
    # window lets side lobes relocate near-delta peaks); edge padding
    # keeps the effective window size constant at the ends.
    half = cfg.smoothing_window // 2
    if half > 0 and m > 1:
        w_smooth = (half + 1.0) - np.abs(np.arange(-half, half + 1))
        w_smooth /= w_smooth.sum()
        padded = np.concatenate([np.repeat(fused[0], half), fused, np.repeat(fused[-1], half)])
        smoothed = np.convolve(padded, w_smooth, mode="valid")
    else:
        smoothed = fused.copy()
    channels = {
        "delta_span": delta_span,
        "delta_mi": delta_mi,
        "probe": probe_channel,
        "fused": fused,
    }
    return smoothed, channels


def _pick_boundaries(scores, min_sep):
    m = scores.shape[0]
    if scores.std() < 1e-12:
        raise AmbiguousBoundaryError("flat boundary score profile", trace=scores)
    is_peak = np.ones(m, dtype=bool)
    for i in range(m):
        if i > 0 and scores[i] < scores[i - 1]:
            is_peak[i] = False
        if i + 1 < m and scores[i] < scores[i + 1]:
            is_peak[i] = False
    order = sorted(range(m), key=lambda i: (-scores[i], i))

    def greedy(candidates):
        chosen = []
        for i in candidates:
            if all(abs(i - j) >= min_sep for j in chosen):
                chosen.append(i)
            if len(chosen) == 2:
                return chosen
        return None

    chosen = greedy([i for i in order if is_peak[i]])
    if chosen is None:
        chosen = greedy(order)  # fall back to global top-2 with separation
    if chosen is None:
        raise AmbiguousBoundaryError(
            "could not find two separated boundary peaks", trace=scores
        )
    l1, l2 = sorted(i + 1 for i in chosen)  # position l-1 in the array is layer l
    return l1, l2


def _detect_once(stack, cfg, sample_idx=None, probe_seeds=None, tag="main", cached_profile=None):
    if sample_idx is not None:
        per_sample_attn = stack.attention is not None and stack.attention[0].ndim == 4
        sub = LayerStack(
            hidden=[h[sample_idx] for h in stack.hidden],
            attention=[A[sample_idx] for A in stack.attention] if per_sample_attn else stack.attention,
            labels={t: y[sample_idx] for t, y in stack.labels.items()} if stack.labels else None,
            manifest=dict(stack.manifest, n_samples=int(len(sample_idx))),
        )
    else:
        sub = stack
    profile = cached_profile if cached_profile is not None else profile_stack(sub)
    mi_profile, _ = adjacent_mi_profile(
        sub,
        k=cfg.ksg_k,
        pca_dim=cfg.pca_dim,
        seed=child_seed(cfg.seed, tag, "mi"),
        max_n=cfg.mi_max_n,
    )
    probe_cfg = replace(
        cfg.probe,
        seed=child_seed(cfg.seed, tag, "probe"),
        n_seeds=probe_seeds or cfg.probe.n_seeds,
    )
    probes = probe_stack(sub, cfg=probe_cfg)
    scores, channels = boundary_scores(
        profile.delta_span, mi_profile, probes.grad, cfg, task_names=probes.tasks
    )
    l1, l2 = _pick_boundaries(scores, cfg.min_separation)
    return l1, l2, scores, channels


def detect_boundaries(stack, cfg: BoundaryConfig = None) -> BoundaryResult:
    """Detect (l1, l2) and assess stability over sample-split folds."""
    cfg = cfg or BoundaryConfig()
    if stack.n_layers < 4:
        raise ValidationError("need at least 4 layers to place two boundaries")
    l1, l2, scores, channels = _detect_once(stack, cfg)

    # sample-averaged attention does not change across sample folds
    attn_cache = None
    if stack.attention is not None and stack.attention[0].ndim == 3:
        attn_cache = profile_stack(stack)

    folds = []
    if cfg.cv_folds > 1:
        n = stack.n_samples
        perm = np.random.default_rng(child_seed(cfg.seed, "cv-perm")).permutation(n)
        parts = np.array_split(perm, cfg.cv_folds)
        for f in range(cfg.cv_folds):
            keep = np.sort(np.concatenate([parts[g] for g in range(cfg.cv_folds) if g != f]))
            try:
                f1, f2, _, _ = _detect_once(
                    stack,
                    cfg,
                    sample_idx=keep,
                    probe_seeds=cfg.cv_probe_seeds,
                    tag=f"fold{f}",
                    cached_profile=attn_cache,
                )
                folds.append((f1, f2))
            except AmbiguousBoundaryError:
                folds.append(None)
    if folds and all(f is not None for f in folds):
        arr = np.array(folds, dtype=float)
        cv_std = float(max(arr[:, 0].std(), arr[:, 1].std()))
    else:
        cv_std = float("inf") if folds else 0.0
    return BoundaryResult(
        l1=l1,
        l2=l2,
        scores=scores,
        channels=channels,
        cv_std=cv_std,
        stable=bool(cv_std < 0.5),
        cv_boundaries=folds,
    )
