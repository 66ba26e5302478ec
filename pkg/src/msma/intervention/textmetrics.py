"""Text-level metrics over generated documents.

Everything is deliberately model-free: sentiment comes from a supplied
lexicon, coherence from bag-of-words cosines (or supplied sentence
embeddings), and max dependency depth is only ever read from an
annotation source, never computed.
"""

from __future__ import annotations

import csv
import re

import numpy as np

from ..errors import ValidationError

_TOKEN = re.compile(r"[^\W_]+(?:'[^\W_]+)?")
_SENTENCE_SPLIT = re.compile(r"[.!?]+")


def tokenize(text):
    return _TOKEN.findall(text.lower())


def split_sentences(text):
    return [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def load_lexicon(path):
    """word,score CSV -> dict."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            out[row[0].strip().lower()] = float(row[1])
    return out


def _bow_cosine(tokens_a, tokens_b):
    vocab = sorted(set(tokens_a) | set(tokens_b))
    if not vocab:
        return 0.0
    index = {w: i for i, w in enumerate(vocab)}
    va = np.zeros(len(vocab))
    vb = np.zeros(len(vocab))
    for t in tokens_a:
        va[index[t]] += 1
    for t in tokens_b:
        vb[index[t]] += 1
    denom = np.linalg.norm(va) * np.linalg.norm(vb)
    return float(min(va @ vb / denom, 1.0)) if denom > 0 else 0.0


def text_metrics(text, lexicon=None, sentence_embeddings=None, dependency_depth=None):
    """Metric dict for one document.

    Always present: lexical_diversity, sentence_count,
    mean_sentence_length. sentiment needs a lexicon; coherence needs
    >= 2 sentences; max_dependency_depth is passed through from
    annotations when given.
    """
    if not isinstance(text, str) or not text.strip():
        raise ValidationError("empty text")
    tokens = tokenize(text)
    sentences = split_sentences(text)
    if not tokens or not sentences:
        raise ValidationError("text contains no tokens")
    metrics = {
        "lexical_diversity": len(set(tokens)) / len(tokens),
        "sentence_count": float(len(sentences)),
        "mean_sentence_length": float(np.mean([len(tokenize(s)) for s in sentences])),
    }
    if lexicon is not None:
        scored = [lexicon[t] for t in tokens if t in lexicon]
        metrics["sentiment"] = float(np.mean(scored)) if scored else 0.0
    if sentence_embeddings is not None:
        E = np.asarray(sentence_embeddings, dtype=float)
        if E.shape[0] != len(sentences):
            raise ValidationError("one embedding per sentence required")
        if len(sentences) >= 2:
            sims = [
                float(E[i] @ E[i + 1] / max(np.linalg.norm(E[i]) * np.linalg.norm(E[i + 1]), 1e-12))
                for i in range(len(sentences) - 1)
            ]
            metrics["coherence"] = float(np.mean(sims))
    elif len(sentences) >= 2:
        toks = [tokenize(s) for s in sentences]
        metrics["coherence"] = float(
            np.mean([_bow_cosine(toks[i], toks[i + 1]) for i in range(len(toks) - 1)])
        )
    if dependency_depth is not None:
        metrics["max_dependency_depth"] = float(dependency_depth)
    return metrics
