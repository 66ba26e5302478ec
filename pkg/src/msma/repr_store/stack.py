"""Layer stack: per-layer hidden states + attention + labels + manifest.

Directory layout:
    manifest.json
    layer_1.msma .. layer_L.msma      hidden states, [n_samples x d]
    attn_1.msma  .. attn_L.msma       optional, [H x seq x seq] (averaged)
                                      or [n_samples x H x seq x seq]
    labels.csv                        optional, header: sample_id,<task>...

Stacks are immutable after load; concurrent readers are safe. Writers
need exclusive access to the directory.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FormatError, ValidationError
from .format import read_tensor, write_tensor

ATTENTION_MODES = ("none", "averaged", "per_sample")
_ROW_SUM_TOL = 1e-5


@dataclass
class LayerStack:
    hidden: list  # L arrays [n x d] float32
    attention: list | None = None  # L arrays, see module docstring
    labels: dict | None = None  # task name -> int array [n]
    manifest: dict = field(default_factory=dict)

    @property
    def n_layers(self):
        return len(self.hidden)

    @property
    def n_samples(self):
        return self.hidden[0].shape[0]

    @property
    def hidden_dim(self):
        return self.hidden[0].shape[1]

    @property
    def attention_mode(self):
        return self.manifest.get("attention_mode", "none" if self.attention is None else "averaged")

    def task_names(self):
        return [t["name"] for t in self.manifest.get("tasks", [])]

    def averaged_attention(self, layer):
        """Attention for 1-based `layer` as [H x seq x seq], averaging the
        per-sample axis when present."""
        if self.attention is None:
            raise ValidationError("stack has no attention tensors")
        A = self.attention[layer - 1]
        if A.ndim == 4:
            return A.mean(axis=0)
        return A

    def validate(self):
        if not self.hidden:
            raise ValidationError("hidden: stack has no layers")
        n, d = self.hidden[0].shape
        for i, h in enumerate(self.hidden, start=1):
            if h.ndim != 2:
                raise ValidationError(f"hidden: layer {i} is not a matrix")
            if h.shape != (n, d):
                raise ValidationError(
                    f"hidden: layer {i} has shape {h.shape}, expected {(n, d)}"
                )
        m = self.manifest
        if m:
            if m.get("n_layers") != self.n_layers:
                raise ValidationError(
                    f"n_layers: manifest says {m.get('n_layers')}, stack has {self.n_layers}"
                )
            if m.get("n_samples") != n:
                raise ValidationError(
                    f"n_samples: manifest says {m.get('n_samples')}, stack has {n}"
                )
            if m.get("hidden_dim") != d:
                raise ValidationError(
                    f"hidden_dim: manifest says {m.get('hidden_dim')}, stack has {d}"
                )
        if self.attention is not None:
            if len(self.attention) != self.n_layers:
                raise ValidationError(
                    f"attention: {len(self.attention)} tensors for {self.n_layers} layers"
                )
            for i, A in enumerate(self.attention, start=1):
                if A.ndim not in (3, 4):
                    raise ValidationError(f"attention: layer {i} has rank {A.ndim}, need 3 or 4")
                if A.shape[-1] != A.shape[-2]:
                    raise ValidationError(f"attention: layer {i} is not square over seq")
                if np.any(A < 0):
                    raise ValidationError(f"attention: layer {i} has negative entries")
                sums = A.sum(axis=-1)
                if np.max(np.abs(sums - 1.0)) > _ROW_SUM_TOL:
                    raise ValidationError(
                        f"attention not row-stochastic at layer {i}: "
                        f"worst row sum {sums.flat[np.argmax(np.abs(sums - 1.0))]:.6f}"
                    )
        if self.labels is not None:
            declared = {t["name"]: t["classes"] for t in m.get("tasks", [])} if m else {}
            for task, y in self.labels.items():
                y = np.asarray(y)
                if y.shape != (n,):
                    raise ValidationError(f"labels: task {task!r} has {y.shape[0]} rows, expected {n}")
                if task in declared:
                    seen = len(np.unique(y))
                    if seen > declared[task]:
                        raise ValidationError(
                            f"labels: task {task!r} has {seen} classes, manifest declares {declared[task]}"
                        )
        return self


def make_manifest(stack: LayerStack, model="synthetic", tasks=None, attention_mode=None, extra=None):
    att = stack.attention
    if attention_mode is None:
        attention_mode = "none" if att is None else ("per_sample" if att[0].ndim == 4 else "averaged")
    manifest = {
        "model": model,
        "n_layers": stack.n_layers,
        "hidden_dim": stack.hidden_dim,
        "n_heads": int(att[0].shape[-3]) if att is not None else 0,
        "seq_len": int(att[0].shape[-1]) if att is not None else 0,
        "n_samples": stack.n_samples,
        "tasks": tasks or [],
        "attention_mode": attention_mode,
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_stack(stack: LayerStack, out_dir) -> Path:
    """Write the stack directory; returns the manifest path.

    Round trip is bit-exact for float32 payloads.
    """
    stack.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, h in enumerate(stack.hidden, start=1):
        write_tensor(out / f"layer_{i}.msma", h)
    if stack.attention is not None:
        for i, A in enumerate(stack.attention, start=1):
            write_tensor(out / f"attn_{i}.msma", A)
    if stack.labels is not None:
        tasks = sorted(stack.labels)
        with open(out / "labels.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample_id"] + tasks)
            for s in range(stack.n_samples):
                w.writerow([s] + [int(stack.labels[t][s]) for t in tasks])
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(stack.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def read_stack(in_dir) -> LayerStack:
    """Load and validate a stack directory."""
    src = Path(in_dir)
    manifest_path = src / "manifest.json"
    if not manifest_path.exists():
        raise FormatError(f"no manifest.json in {src}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    n_layers = int(manifest.get("n_layers", 0))
    if n_layers < 1:
        raise ValidationError("n_layers: manifest declares no layers")

    hidden = []
    for i in range(1, n_layers + 1):
        p = src / f"layer_{i}.msma"
        if not p.exists():
            raise ValidationError(
                f"hidden: manifest declares {n_layers} layers but {p.name} is missing"
            )
        hidden.append(read_tensor(p))

    attention = None
    if manifest.get("attention_mode", "none") != "none":
        attention = []
        for i in range(1, n_layers + 1):
            p = src / f"attn_{i}.msma"
            if not p.exists():
                raise ValidationError(f"attention: {p.name} is missing")
            attention.append(read_tensor(p))

    labels = None
    labels_path = src / "labels.csv"
    if labels_path.exists():
        with open(labels_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0] != "sample_id":
                raise FormatError("labels.csv must start with a sample_id column")
            tasks = header[1:]
            rows = list(reader)
        labels = {
            t: np.array([int(row[j + 1]) for row in rows], dtype=np.int64)
            for j, t in enumerate(tasks)
        }

    stack = LayerStack(hidden=hidden, attention=attention, labels=labels, manifest=manifest)
    stack.validate()
    return stack
