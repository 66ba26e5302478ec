"""Paired baseline/intervened text generation with forward hooks."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import torch

from msma.errors import ValidationError
from msma.intervention import InterventionSpec, resolve_layers
from msma.rng import child_seed, rng_for

from .job import ExtractionJob, load_model, read_corpus

TEXT_METRICS = (
    "lexical_diversity", "sentence_count", "mean_sentence_length",
    "max_dependency_depth", "coherence", "sentiment",
)


def load_intervention_spec(path):
    """JSON file -> (InterventionSpec, boundaries)."""
    with open(path) as fh:
        payload = json.load(fh)
    if "boundaries" not in payload:
        raise ValidationError("intervention spec file needs a boundaries entry [l1, l2]")
    boundaries = tuple(int(x) for x in payload.pop("boundaries"))
    delta = payload.pop("delta", None)
    spec = InterventionSpec(delta=np.array(delta, dtype=float) if delta is not None else None, **payload)
    if spec.kind == "attention":
        raise ValidationError(
            "attention interventions are dump-side operations; generation hooks "
            "support translate, scale, and noise"
        )
    return spec, boundaries


def _find_blocks(model):
    """The per-layer transformer block modules, in depth order."""
    for attr in ("transformer", "model", "gpt_neox"):
        trunk = getattr(model, attr, None)
        if trunk is None:
            continue
        for layers_attr in ("h", "layers", "decoder"):
            layers = getattr(trunk, layers_attr, None)
            if layers is None and hasattr(trunk, "decoder"):
                layers = getattr(trunk.decoder, "layers", None)
            if layers is not None and len(layers) > 0:
                return list(layers)
    raise ValidationError("could not locate the model's transformer blocks")


def _hook_for(spec: InterventionSpec, layer_seed):
    gen = rng_for(layer_seed)

    def hook(module, inputs, output):
        h = output[0] if isinstance(output, tuple) else output
        if spec.kind == "translate":
            delta = torch.as_tensor(spec.delta, dtype=h.dtype, device=h.device)
            if delta.shape[-1] != h.shape[-1]:
                raise ValidationError(
                    f"delta has dimension {delta.shape[-1]}, hidden size is {h.shape[-1]}"
                )
            h = h + delta
        elif spec.kind == "scale":
            h = h * spec.alpha
        elif spec.kind == "noise":
            eta = torch.as_tensor(
                gen.normal(size=tuple(h.shape)), dtype=h.dtype, device=h.device
            )
            h = h + spec.sigma * eta
        if isinstance(output, tuple):
            return (h,) + tuple(output[1:])
        return h

    return hook


def generate_with_intervention(job: ExtractionJob, spec, boundaries, out_dir,
                               n_reps=30, prompt_tokens=8, max_new_tokens=32) -> Path:
    """Baseline vs intervened generations, paired by (prompt, rep).

    The same sampling seed drives both runs of a pair, so identity
    parameters give byte-identical texts. Writes texts/ plus a
    generations.csv manifest and a pairs_skeleton.csv ready for metric
    values. Returns the output directory.
    """
    model, tokenizer = load_model(job.model)
    if not model.can_generate():
        raise ValidationError("model cannot generate (encoder-only?); use a decoder")
    blocks = _find_blocks(model)
    layers = resolve_layers(spec.scale, boundaries, len(blocks))
    if max(layers) > len(blocks):
        raise ValidationError(f"intervention targets layer {max(layers)} but model has {len(blocks)}")

    prompts = read_corpus(job.corpus, job.max_docs)
    out = Path(out_dir)
    (out / "texts").mkdir(parents=True, exist_ok=True)

    rows = []
    for pi, prompt in enumerate(prompts):
        enc = tokenizer(prompt, return_tensors="pt", truncation=True, max_length=prompt_tokens)
        for rep in range(n_reps):
            pair_seed = child_seed(job.seed, "gen", pi, rep)
            texts = {}
            for condition in ("baseline", "intervened"):
                handles = []
                if condition == "intervened":
                    for layer in layers:
                        handles.append(
                            blocks[layer - 1].register_forward_hook(
                                _hook_for(spec, child_seed(pair_seed, "layer", layer))
                            )
                        )
                torch.manual_seed(pair_seed % (1 << 62))
                ids = model.generate(
                    **enc, do_sample=True, max_new_tokens=max_new_tokens,
                    pad_token_id=tokenizer.pad_token_id,
                )
                for handle in handles:
                    handle.remove()
                text = tokenizer.decode(ids[0], skip_special_tokens=True)
                path = out / "texts" / f"prompt{pi}_rep{rep}_{condition}.txt"
                path.write_text(text + "\n", encoding="utf-8")
                texts[condition] = path
            rows.append((pi, rep, texts["baseline"].name, texts["intervened"].name))

    with open(out / "generations.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["prompt", "rep", "baseline_file", "intervened_file"])
        w.writerows(rows)
    # skeleton for the primary component's `stats` command
    with open(out / "pairs_skeleton.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "metric", "baseline", "intervened"])
        for run_id, (pi, rep, _, _) in enumerate(rows):
            for metric in TEXT_METRICS:
                w.writerow([run_id, metric, "", ""])
    return out
