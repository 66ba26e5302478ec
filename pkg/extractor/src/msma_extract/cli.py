"""msma-extract: dump model internals into the msma stack format."""

from __future__ import annotations

import argparse
import sys

from msma.errors import FormatError, ValidationError

from .extract import extract
from .generate import generate_with_intervention, load_intervention_spec
from .job import ExtractionJob


def build_parser():
    p = argparse.ArgumentParser(prog="msma-extract", description=__doc__)
    p.add_argument("--model", required=True, help="checkpoint id or local path")
    p.add_argument("--corpus", required=True, help="plain text, one document per line")
    p.add_argument("--out", required=True)
    p.add_argument("--max-docs", type=int, default=64)
    p.add_argument("--seq-len", type=int, default=128)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--labels", default=None, help="sidecar CSV: doc_id + task columns")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--intervention", default=None,
                   help="JSON spec; switches to paired generation mode")
    p.add_argument("--reps", type=int, default=30, help="repetitions per prompt (generation mode)")
    p.add_argument("--max-new-tokens", type=int, default=32)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    job = ExtractionJob(
        model=args.model, corpus=args.corpus, max_docs=args.max_docs,
        seq_len=args.seq_len, batch_size=args.batch_size, labels=args.labels,
        intervention=args.intervention, seed=args.seed,
    )
    try:
        if args.intervention:
            spec, boundaries = load_intervention_spec(args.intervention)
            out = generate_with_intervention(
                job, spec, boundaries, args.out,
                n_reps=args.reps, max_new_tokens=args.max_new_tokens,
            )
            print(f"wrote paired generations to {out}")
        else:
            manifest = extract(job, args.out)
            print(f"wrote stack to {manifest.parent}")
        return 0
    except (ValidationError, FormatError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
