"""Layerwise linear probes and their performance gradients.

Probes are multinomial logistic classifiers trained with full-batch
gradient descent (cosine-decayed step, halving guard), so training is
convex, deterministic given the split seed, and its loss trace is
non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .rng import child_seed, rng_for


@dataclass
class ProbeConfig:
    epochs: int = 200
    lr: float = 0.1
    l2: float = 1e-3
    test_frac: float = 0.2
    n_seeds: int = 5  # split reshuffles averaged in probe_stack
    seed: int = 0


@dataclass
class ProbeResult:
    tasks: list
    accuracy: np.ndarray  # [L x T]
    macro_f1: np.ndarray  # [L x T]
    grad: np.ndarray  # [L-1 x T], grad[l] = P[l+1] - P[l]
    config: ProbeConfig


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _macro_f1(y_true, y_pred, classes):
    scores = []
    for c in classes:
        tp = np.sum((y_pred == c) & (y_true == c))
        fp = np.sum((y_pred == c) & (y_true != c))
        fn = np.sum((y_pred != c) & (y_true == c))
        denom = 2 * tp + fp + fn
        scores.append(2.0 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(scores))


def train_probe(features, labels, cfg: ProbeConfig = None):
    """Train one probe; returns (weights dict, metrics dict).

    Metrics: held-out accuracy, macro_f1, and the (non-increasing)
    training loss trace.
    """
    cfg = cfg or ProbeConfig()
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError("features/labels shape mismatch")
    if not np.isfinite(X).all():
        raise ValidationError("features contain non-finite values")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValidationError("degenerate task: labels contain a single class")

    n = X.shape[0]
    order = rng_for(cfg.seed, "probe-split").permutation(n)
    n_test = max(1, int(round(cfg.test_frac * n)))
    test_idx, train_idx = order[:n_test], order[n_test:]
    y_tr, y_te = y[train_idx], y[test_idx]
    if np.unique(y_tr).size < 2:
        raise ValidationError("degenerate task: train split has a single class")

    mu = X[train_idx].mean(axis=0)
    sd = X[train_idx].std(axis=0)
    sd[sd == 0] = 1.0
    Xtr = (X[train_idx] - mu) / sd
    Xte = (X[test_idx] - mu) / sd

    class_to_col = {c: j for j, c in enumerate(classes)}
    t_tr = np.zeros((len(train_idx), classes.size))
    t_tr[np.arange(len(train_idx)), [class_to_col[c] for c in y_tr]] = 1.0

    d, k = Xtr.shape[1], classes.size
    W = np.zeros((d, k))
    b = np.zeros(k)
    hot = t_tr.astype(bool)

    def eval_at(W_, b_):
        p_ = _softmax(Xtr @ W_ + b_)
        ce = -np.log(np.clip(p_[hot], 1e-12, None)).mean()
        return p_, ce + cfg.l2 * np.sum(W_ * W_)

    p, cur_loss = eval_at(W, b)
    trace = [cur_loss]
    scale = 1.0
    for t in range(cfg.epochs):
        lr_t = cfg.lr * 0.5 * (1.0 + np.cos(np.pi * t / cfg.epochs)) * scale
        g = (p - t_tr) / len(train_idx)
        gW = Xtr.T @ g + 2.0 * cfg.l2 * W
        gb = g.sum(axis=0)
        for _ in range(20):
            W_new, b_new = W - lr_t * gW, b - lr_t * gb
            p_new, new_loss = eval_at(W_new, b_new)
            if new_loss <= cur_loss:
                W, b, p, cur_loss = W_new, b_new, p_new, new_loss
                break
            lr_t *= 0.5
            scale *= 0.5
        trace.append(cur_loss)
        # converged: the last 8 accepted steps changed nothing measurable
        if t >= 8 and trace[-9] - trace[-1] < 1e-9 * max(1.0, abs(trace[-1])):
            break

    pred = classes[np.argmax(Xte @ W + b, axis=1)]
    metrics = {
        "accuracy": float(np.mean(pred == y_te)),
        "macro_f1": _macro_f1(y_te, pred, classes),
        "loss_trace": np.array(trace),
    }
    probe = {"W": W, "b": b, "mean": mu, "std": sd, "classes": classes}
    return probe, metrics


def probe_stack(stack, tasks=None, cfg: ProbeConfig = None) -> ProbeResult:
    """Accuracy/F1 per (layer, task), averaged over split reshuffles."""
    cfg = cfg or ProbeConfig()
    available = stack.task_names()
    if stack.labels is None or not available:
        raise ValidationError("stack has no labels")
    tasks = list(tasks) if tasks is not None else available
    for t in tasks:
        if t not in stack.labels:
            raise ValidationError(f"missing task column {t!r}")

    L, T = stack.n_layers, len(tasks)
    acc = np.zeros((L, T))
    f1 = np.zeros((L, T))
    for ti, task in enumerate(tasks):
        y = stack.labels[task]
        for layer in range(L):
            a_sum = f_sum = 0.0
            for rep in range(cfg.n_seeds):
                sub = replace(cfg, seed=child_seed(cfg.seed, "probe", task, layer, rep))
                _, m = train_probe(stack.hidden[layer], y, sub)
                a_sum += m["accuracy"]
                f_sum += m["macro_f1"]
            acc[layer, ti] = a_sum / cfg.n_seeds
            f1[layer, ti] = f_sum / cfg.n_seeds
    return ProbeResult(tasks=tasks, accuracy=acc, macro_f1=f1, grad=np.diff(acc, axis=0), config=cfg)
