"""Extraction job description and model loading."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from transformers import AutoModelForCausalLM, AutoTokenizer

from msma.errors import ValidationError


@dataclass
class ExtractionJob:
    model: str  # checkpoint id or local path
    corpus: str  # plain text, one document per line
    max_docs: int = 64
    seq_len: int = 128
    batch_size: int = 8
    labels: str = None  # sidecar CSV: doc_id + one column per task
    intervention: str = None  # JSON intervention spec (generation mode)
    seed: int = 0

    def __post_init__(self):
        if self.max_docs < 1:
            raise ValidationError("max_docs must be >= 1")
        if self.seq_len < 2:
            raise ValidationError("seq_len must be >= 2")


def load_model(name_or_path):
    """(model, tokenizer) in eval mode; eager attention so weights are
    returned with the outputs."""
    model = AutoModelForCausalLM.from_pretrained(name_or_path, attn_implementation="eager")
    tokenizer = AutoTokenizer.from_pretrained(name_or_path)
    if tokenizer.pad_token is None:
        tokenizer.pad_token = tokenizer.eos_token
    model.eval()
    torch.set_grad_enabled(False)
    return model, tokenizer


def max_positions(model):
    cfg = model.config
    for attr in ("n_positions", "max_position_embeddings"):
        if getattr(cfg, attr, None):
            return int(getattr(cfg, attr))
    return 1 << 30


def read_corpus(path, max_docs):
    """Non-empty corpus lines (empty lines are skipped with a warning)."""
    import warnings

    docs = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            text = line.strip()
            if not text:
                warnings.warn(f"skipping empty corpus line {i + 1}")
                continue
            docs.append(text)
            if len(docs) >= max_docs:
                break
    if not docs:
        raise ValidationError("corpus contains no non-empty lines")
    return docs
