"""Dump hidden states + attentions into the msma stack directory format."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import torch

from msma.errors import ValidationError
from msma.repr_store import LayerStack, make_manifest, read_stack, write_stack

from .job import ExtractionJob, load_model, max_positions, read_corpus


def _read_label_sidecar(path, n_docs):
    """CSV with a doc_id column plus one column per task; categorical
    values are factorized to dense integer codes."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) < n_docs:
        raise ValidationError(f"label sidecar has {len(rows)} rows for {n_docs} documents")
    tasks = [c for c in rows[0] if c != "doc_id"]
    labels = {}
    cardinalities = {}
    for task in tasks:
        values = [rows[i][task] for i in range(n_docs)]
        classes = sorted(set(values))
        index = {c: i for i, c in enumerate(classes)}
        labels[task] = np.array([index[v] for v in values], dtype=np.int64)
        cardinalities[task] = len(classes)
    return labels, cardinalities


def _forward_batches(model, tokenizer, docs, seq_len, batch_size):
    """Yield (hidden_states tuple, attentions tuple, attention_mask) per
    batch, retrying once at half batch size on OOM."""
    start = 0
    while start < len(docs):
        batch = docs[start: start + batch_size]
        enc = tokenizer(
            batch, return_tensors="pt", padding="max_length",
            truncation=True, max_length=seq_len,
        )
        try:
            out = model(**enc, output_hidden_states=True, output_attentions=True)
        except (RuntimeError, torch.cuda.OutOfMemoryError) as err:
            if "out of memory" not in str(err).lower() or batch_size == 1:
                raise
            batch_size = max(1, batch_size // 2)
            continue
        yield out.hidden_states, out.attentions, enc["attention_mask"]
        start += len(batch)


def extract(job: ExtractionJob, out_dir) -> Path:
    """Run the corpus through the model and write a stack directory.

    Hidden states are mean-pooled over (unpadded) tokens per document;
    attention is averaged over the corpus per (layer, head). Returns the
    manifest path; the output always revalidates via read_stack.
    """
    model, tokenizer = load_model(job.model)
    if job.seq_len > max_positions(model):
        raise ValidationError(
            f"seq_len {job.seq_len} exceeds the model maximum {max_positions(model)}"
        )
    docs = read_corpus(job.corpus, job.max_docs)

    pooled = None  # per layer: list of [n x d]
    attn_sum = None  # per attention layer: [H x S x S]
    n_seen = 0
    for hidden_states, attentions, mask in _forward_batches(
        model, tokenizer, docs, job.seq_len, job.batch_size
    ):
        weights = mask.unsqueeze(-1).to(hidden_states[0].dtype)
        denom = weights.sum(dim=1).clamp(min=1.0)
        if pooled is None:
            pooled = [[] for _ in hidden_states]
            attn_sum = [torch.zeros_like(a[0]) for a in attentions]
        for li, h in enumerate(hidden_states):
            pooled[li].append(((h * weights).sum(dim=1) / denom).float())
        for li, a in enumerate(attentions):
            attn_sum[li] += a.float().sum(dim=0)
        n_seen += mask.shape[0]

    hidden = [torch.cat(layers).numpy().astype(np.float32) for layers in pooled]
    attention = None
    if attn_sum:
        attention = [(a / n_seen).numpy().astype(np.float32) for a in attn_sum]
        # pooled softmax rows drift from 1 in float32; renormalize exactly
        attention = [a / a.sum(axis=-1, keepdims=True) for a in attention]
        # hidden states include the embedding layer; attentions do not.
        # Broadcast the first block's pattern for the embedding layer so
        # every layer file has a companion, keeping the stack uniform.
        attention = [attention[0]] + attention

    labels = None
    tasks = []
    if job.labels:
        labels, cardinalities = _read_label_sidecar(job.labels, len(docs))
        tasks = [{"name": t, "classes": k} for t, k in sorted(cardinalities.items())]

    stack = LayerStack(hidden=hidden, attention=attention, labels=labels, manifest={})
    stack.manifest = make_manifest(
        stack,
        model=str(job.model),
        tasks=tasks,
        attention_mode="averaged" if attention else "none",
        extra={"n_documents": len(docs), "seq_len": job.seq_len, "seed": job.seed},
    )
    manifest_path = write_stack(stack, out_dir)
    read_stack(out_dir)  # format contract check
    return manifest_path
