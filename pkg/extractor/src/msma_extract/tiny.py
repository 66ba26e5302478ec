"""Build a tiny random decoder checkpoint for offline runs and tests.

The checkpoint round-trips through save_pretrained/from_pretrained, so
the rest of the pipeline exercises exactly the code paths a real
checkpoint would.
"""

from __future__ import annotations

from pathlib import Path

import torch
from tokenizers import Tokenizer
from tokenizers.models import WordLevel
from tokenizers.pre_tokenizers import Whitespace
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

BASE_VOCAB = ("<pad>", "<unk>", "<eos>")


def build_tiny_decoder(out_dir, corpus_words, n_layer=4, n_head=2, n_embd=32,
                       n_positions=128, seed=0) -> Path:
    """Save a random GPT-2-style decoder plus a word-level tokenizer."""
    vocab = {tok: i for i, tok in enumerate(BASE_VOCAB)}
    for w in corpus_words:
        vocab.setdefault(w, len(vocab))
    tok = Tokenizer(WordLevel(vocab, unk_token="<unk>"))
    tok.pre_tokenizer = Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, pad_token="<pad>", unk_token="<unk>", eos_token="<eos>"
    )
    config = GPT2Config(
        vocab_size=len(vocab), n_positions=n_positions, n_embd=n_embd,
        n_layer=n_layer, n_head=n_head,
        bos_token_id=vocab["<eos>"], eos_token_id=vocab["<eos>"],
        pad_token_id=vocab["<pad>"],
    )
    torch.manual_seed(seed)
    model = GPT2LMHeadModel(config)
    out = Path(out_dir)
    model.save_pretrained(out)
    fast.save_pretrained(out)
    return out
