"""Joint training of cross-scale maps, critics, and classifier heads.

The map parameters follow Adam on
    L = lambda_geo L_geo + lambda_info L_info + lambda_curv L_curv
with the MINE critics updated in alternating steps (several critic
steps per map step) and the curvature gradient taken with the local
neighborhood geometry frozen. Classifier heads train on the raw pooled
representations, so their loss never moves the maps.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..errors import TrainingDivergedError, ValidationError
from ..estimators.dcor import distance_correlation
from ..estimators.gaussian import fit_gaussian, gaussian_kl
from ..estimators.ksg import ksg_mi
from ..estimators.mine import MineCritic
from ..estimators.pca import pca_fit, reduce_dim
from ..nnet import Adam
from ..rng import child_seed, rng_for
from .heads import DEFAULT_HEAD_DIMS, SCALE_ORDER, ClassifierHeads
from .loss import LossConfig, LossReport
from .maps import LinearMap, MlpMap
from .pooling import pool_scales


def metric_triple(mapped, target, max_n=512, pca_dim=50, seed=0):
    """KL / MI / distance-correlation triple for one mapping direction.

    KL: Gaussian fits in a shared (union) PCA basis. MI: KSG on each
    side's own PCA reduction, over a seeded subsample. DC: distance
    correlation on the raw pair.
    """
    mapped = np.asarray(mapped, dtype=float)
    target = np.asarray(target, dtype=float)
    basis = pca_fit(np.vstack([mapped, target]), min(pca_dim, mapped.shape[1]))
    kl = gaussian_kl(
        fit_gaussian(basis.transform(mapped)), fit_gaussian(basis.transform(target))
    )
    n = mapped.shape[0]
    if n > max_n:
        idx = np.sort(rng_for(seed, "metric-subsample").choice(n, size=max_n, replace=False))
        m_s, t_s = mapped[idx], target[idx]
    else:
        m_s, t_s = mapped, target
    mi = ksg_mi(reduce_dim(m_s, pca_dim), reduce_dim(t_s, pca_dim), seed=child_seed(seed, "mi")).mi
    dc = distance_correlation(mapped, target, seed=child_seed(seed, "dc"))
    return {"kl": float(kl), "mi": float(mi), "dc": float(dc)}


@dataclass
class AlignmentRun:
    maps: dict  # {"gi": map, "il": map}
    heads: object
    report: LossReport
    boundaries: tuple
    scales: object


class _PairState:
    """One mapping direction: map + critic + optimizer."""

    def __init__(self, tag, src, dst, cfg, seed):
        self.tag = tag
        self.src = src
        self.dst = dst
        d_src, d_dst = src.shape[1], dst.shape[1]
        if cfg.map_kind == "linear":
            self.map = LinearMap.identity(d_src, d_dst)
        else:
            self.map = MlpMap(d_src, d_dst, hidden=cfg.mlp_hidden, seed=child_seed(seed, tag, "map"))
        self.opt = Adam(self.map.params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
        self.critic = None
        if cfg.lambda_info > 0:
            self.critic = MineCritic(
                d_src, d_dst,
                hidden=cfg.critic_hidden,
                lr=cfg.critic_lr,
                ema_rate=cfg.ema_rate,
                seed=child_seed(seed, tag, "critic"),
            )
            self.map.critic = self.critic


def _train_pairs(pairs, cfg, heads=None, labels=None, scale_reps=None, metric_seed=0):
    """Inner loop shared by train_alignment and train_mlp_map.

    pairs: list of _PairState. Returns a LossReport; mutates maps/heads.
    """
    n = pairs[0].src.shape[0]
    rng = rng_for(cfg.seed, "train-batches")
    head_opt = Adam(heads.params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps) if heads else None
    report = LossReport(config=cfg)

    for epoch in range(cfg.epochs):
        if cfg.lr_schedule == "cosine":
            lr_now = cfg.lr * 0.5 * (1.0 + np.cos(np.pi * epoch / max(cfg.epochs - 1, 1)))
            for st in pairs:
                st.opt.lr = lr_now
            if head_opt:
                head_opt.lr = lr_now
        if cfg.full_batch:
            batches = [np.arange(n)]
        else:
            order = rng.permutation(n)
            batches = [
                order[i: i + cfg.batch_size]
                for i in range(0, n - cfg.batch_size + 1, cfg.batch_size)
            ] or [order]
        for batch in batches:
            entry = {"L_geo": 0.0, "L_info": 0.0, "L_curv": 0.0, "L_cls": None, "epoch": epoch}
            for st in pairs:
                src_b, dst_b = st.src[batch], st.dst[batch]
                b = len(batch)
                # --- critic updates (map frozen) ---
                if st.critic is not None:
                    for _ in range(cfg.critic_steps):
                        marg = rng.integers(0, n, size=b)
                        st.critic.step(
                            src_b, st.map.apply(src_b), src_b, st.map.apply(st.src[marg])
                        )
                # --- map update (critic frozen) ---
                if st.map.kind == "mlp":
                    mapped_b, cache = st.map.forward(src_b)
                else:
                    mapped_b, cache = st.map.apply(src_b), src_b
                resid = mapped_b - dst_b
                l_geo = float((resid**2).sum() / b)
                d_mapped = cfg.lambda_geo * (2.0 / b) * resid
                if st.critic is not None and cfg.lambda_info > 0:
                    perm = rng.permutation(b)
                    bound, d_joint, d_marg = st.critic.input_grads(
                        src_b, mapped_b, src_b, mapped_b[perm]
                    )
                    info_grad = d_joint.copy()
                    np.add.at(info_grad, perm, d_marg)
                    d_mapped += cfg.lambda_info * info_grad
                    entry["L_info"] -= st.critic.smoothed_bound
                if cfg.lambda_curv > 0 and b > cfg.curv_dim + 2:
                    sub = np.arange(min(cfg.curv_batch, b))
                    k_nn = min(cfg.curv_train_knn, len(sub) - 1)
                    if k_nn >= cfg.curv_dim + 2:
                        # local quadratic fits are meaningless in high
                        # ambient dimension; take the penalty in a
                        # stop-gradient PCA view and average per point
                        pts = mapped_b[sub]
                        view = min(cfg.curv_view, pts.shape[1])
                        if view < pts.shape[1]:
                            centered = pts - pts.mean(axis=0)
                            V = np.linalg.svd(centered, full_matrices=False)[2][:view].T
                            c_val, g_view = _curv_grad(pts @ V, k_nn, cfg.curv_dim)
                            c_grad = g_view @ V.T
                        else:
                            c_val, c_grad = _curv_grad(pts, k_nn, cfg.curv_dim)
                        entry["L_curv"] += c_val / len(sub)
                        d_mapped[sub] += cfg.lambda_curv * c_grad / len(sub)
                entry["L_geo"] += l_geo
                if cfg.lambda_geo > 0 or cfg.lambda_info > 0 or cfg.lambda_curv > 0:
                    grads = st.map.backward(cache, d_mapped)
                    st.opt.step(grads)
            if heads is not None:
                reps_b = {k: scale_reps[k][batch] for k in SCALE_ORDER}
                labels_b = {k: labels[k][batch] for k in SCALE_ORDER}
                l_cls, h_grads, _ = heads.loss_and_grads(reps_b, labels_b)
                head_opt.step(h_grads)
                entry["L_cls"] = l_cls
            entry["L_total"] = (
                cfg.lambda_geo * entry["L_geo"]
                + cfg.lambda_info * entry["L_info"]
                + cfg.lambda_curv * entry["L_curv"]
                + (entry["L_cls"] if entry["L_cls"] is not None and cfg.cls_in_total else 0.0)
            )
            if not np.isfinite(entry["L_total"]):
                raise TrainingDivergedError("non-finite training loss", trace=report.steps)
            report.steps.append(entry)
        if cfg.metric_every and (epoch % cfg.metric_every == 0 or epoch == cfg.epochs - 1):
            metrics = {"epoch": epoch}
            for st in pairs:
                metrics[st.tag] = metric_triple(
                    st.map.apply(st.src), st.dst,
                    max_n=cfg.metric_max_n, pca_dim=cfg.metric_pca,
                    seed=child_seed(metric_seed, "epoch-metric", st.tag, epoch),
                )
            report.epoch_metrics.append(metrics)
    return report


def _curv_grad(points, k_nn, local_dim):
    from .curvature import curvature_with_grad

    return curvature_with_grad(points, k_nn=k_nn, local_dim=local_dim)


def _fit_error_budget(report, pair_tags):
    """Least-squares fit of KL ~= C (eps_geo + eps_info) over epochs.

    eps_info is the shortfall of the smoothed MINE bound below its best
    value over the run (0 when the info term is off). Diagnostic only.
    """
    if not report.epoch_metrics:
        return {}
    per_epoch = []
    steps = report.steps
    for m in report.epoch_metrics:
        ep = m["epoch"]
        ep_steps = [s for s in steps if s["epoch"] == ep]
        geo = float(np.mean([s["L_geo"] for s in ep_steps]))
        info = float(np.mean([s["L_info"] for s in ep_steps]))
        kl = float(np.mean([m[tag]["kl"] for tag in pair_tags]))
        per_epoch.append((kl, geo, info))
    bounds = [-info for _, _, info in per_epoch]
    best = max(bounds) if bounds else 0.0
    eps = np.array([[kl, geo + max(0.0, best - (-info))] for kl, geo, info in per_epoch])
    denom = float((eps[:, 1] ** 2).sum())
    C = float((eps[:, 0] * eps[:, 1]).sum() / denom) if denom > 0 else 0.0
    final_kl, final_geo, final_info = per_epoch[-1]
    return {
        "eps_geo": final_geo,
        "eps_info": max(0.0, best - (-final_info)),
        "C": C,
        "budget": C * (final_geo + max(0.0, best - (-final_info))),
        "final_kl": final_kl,
    }


def train_alignment(stack, boundaries, cfg: LossConfig = None) -> AlignmentRun:
    """Train f_GI and f_IL on pooled scales under the weighted loss."""
    cfg = cfg or LossConfig()
    scales = pool_scales(stack, boundaries)
    hG, hI, hL = scales.h_global, scales.h_intermediate, scales.h_local

    heads = None
    labels = None
    want_heads = cfg.heads_enabled
    if want_heads is None:
        want_heads = stack.labels is not None and set(SCALE_ORDER) <= set(stack.labels or {})
    if want_heads:
        if stack.labels is None:
            raise ValidationError("heads enabled but the stack has no labels")
        labels = {k: np.asarray(stack.labels[k]) for k in SCALE_ORDER}
        dims = cfg.head_dims
        if dims is None:
            declared = {t["name"]: t["classes"] for t in stack.manifest.get("tasks", [])}
            dims = tuple(declared.get(k, DEFAULT_HEAD_DIMS[i]) for i, k in enumerate(SCALE_ORDER))
        heads = ClassifierHeads(
            input_dim=hG.shape[1],
            dims=dims,
            temperature=cfg.temperature,
            label_smoothing=cfg.label_smoothing,
            seed=child_seed(cfg.seed, "heads"),
        )

    pairs = [
        _PairState("gi", hG, hI, cfg, cfg.seed),
        _PairState("il", hI, hL, cfg, cfg.seed),
    ]
    scale_reps = {"global": hG, "intermediate": hI, "local": hL}
    report = _train_pairs(
        pairs, cfg, heads=heads, labels=labels, scale_reps=scale_reps, metric_seed=cfg.seed
    )
    report.final_metrics = {
        st.tag: metric_triple(
            st.map.apply(st.src), st.dst,
            max_n=cfg.metric_max_n, pca_dim=cfg.metric_pca,
            seed=child_seed(cfg.seed, "final-metric", st.tag),
        )
        for st in pairs
    }
    report.error_budget = _fit_error_budget(report, [st.tag for st in pairs])
    maps = {st.tag: st.map for st in pairs}
    bounds = (boundaries.l1, boundaries.l2) if hasattr(boundaries, "l1") else tuple(boundaries)
    return AlignmentRun(maps=maps, heads=heads, report=report, boundaries=bounds, scales=scales)


def train_mlp_map(src, dst, cfg: LossConfig = None):
    """Train a single nonlinear map under the weighted loss.

    Returns (MlpMap, LossReport)."""
    cfg = replace(cfg or LossConfig(), map_kind="mlp")
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.shape[0] != dst.shape[0]:
        raise ValidationError("src and dst must have the same number of samples")
    pair = _PairState("map", src, dst, cfg, cfg.seed)
    report = _train_pairs([pair], cfg, metric_seed=cfg.seed)
    report.final_metrics = {
        "map": metric_triple(
            pair.map.apply(src), dst,
            max_n=cfg.metric_max_n, pca_dim=cfg.metric_pca,
            seed=child_seed(cfg.seed, "final-metric"),
        )
    }
    return pair.map, report


def default_ablation_grid():
    """8 named groups plus the geometric-weight sweep."""
    grid = {
        "baseline": (0.0, 0.0, 0.0),
        "full_msma": (0.1, 0.1, 0.01),
        "no_geo": (0.0, 0.1, 0.01),
        "no_info": (0.1, 0.0, 0.01),
        "no_curv": (0.1, 0.1, 0.0),
        "only_geo": (0.1, 0.0, 0.0),
        "only_info": (0.0, 0.1, 0.0),
        "only_curv": (0.0, 0.0, 0.01),
    }
    for w in range(1, 11):
        grid[f"geo-{w / 10:g}"] = (w / 10.0, 0.0, 0.0)
    return grid


def _ablation_cell(args):
    name, lambdas, stack_payload, boundaries, cfg = args
    from ..repr_store.stack import LayerStack

    stack = LayerStack(**stack_payload)
    cell_cfg = replace(
        cfg,
        lambda_geo=lambdas[0],
        lambda_info=lambdas[1],
        lambda_curv=lambdas[2],
        metric_every=0,
        seed=child_seed(cfg.seed, "cell", name),
    )
    try:
        run = train_alignment(stack, boundaries, cell_cfg)
        row = {"group": name}
        for tag, short in (("gi", "gm"), ("il", "ml")):
            m = run.report.final_metrics[tag]
            row[f"KL_{short}"] = m["kl"]
            row[f"MI_{short}"] = m["mi"]
            row[f"DC_{short}"] = m["dc"]
        return name, row
    except Exception as err:  # cell failure must not kill the grid
        return name, {"group": name, "error": f"{type(err).__name__}: {err}"}


def worker_count(n_jobs):
    cap = os.environ.get("MSMA_THREADS")
    cap = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def run_ablation(stack, grid=None, boundaries=None, cfg: LossConfig = None):
    """Train one cell per grid entry; returns rows in grid order.

    Cells run in worker processes (MSMA_THREADS caps the pool); each
    cell's seed derives from (master seed, cell name) so results do not
    depend on scheduling.
    """
    if grid is None:
        grid = default_ablation_grid()
    if not grid:
        raise ValidationError("ablation grid is empty")
    cfg = cfg or LossConfig()
    if boundaries is None:
        planted = stack.manifest.get("planted_boundaries")
        if planted:
            boundaries = tuple(planted)
        else:
            from ..boundary import detect_boundaries

            res = detect_boundaries(stack)
            boundaries = (res.l1, res.l2)
    payload = {
        "hidden": stack.hidden,
        "attention": None,
        "labels": stack.labels,
        "manifest": dict(stack.manifest, attention_mode="none"),
    }
    jobs = [(name, lambdas, payload, boundaries, cfg) for name, lambdas in grid.items()]
    workers = worker_count(len(jobs))
    results = {}
    if workers <= 1:
        for job in jobs:
            name, row = _ablation_cell(job)
            results[name] = row
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for name, row in pool.map(_ablation_cell, jobs):
                results[name] = row
    return {"boundaries": list(boundaries), "rows": [results[name] for name in grid]}
