"""Command-line surface for the pipeline.

Every command writes machine-readable reports (JSON + CSV) into its
output directory; each report embeds the resolved configuration and
seed, so identical (command, config, seed, input) invocations produce
byte-identical outputs. Exit codes: 0 success, 1 validation/usage,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .attention import profile_stack
from .boundary import BoundaryConfig, adjacent_mi_profile, detect_boundaries
from .errors import AmbiguousBoundaryError, FormatError, ValidationError
from .estimators.gaussian import fit_gaussian, gaussian_kl
from .estimators.pca import pca_fit
from .intervention import (
    InterventionSpec,
    StudyConfig,
    apply_to_stack,
    load_lexicon,
    resolve_layers,
    run_effect_study,
)
from .probing import ProbeConfig, probe_stack
from .repr_store import SyntheticSpec, generate_synthetic, read_stack, write_stack
from .alignment import LossConfig, default_ablation_grid, run_ablation, train_alignment


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _report_payload(args, extra):
    cfg = {k: _jsonable(v) for k, v in vars(args).items() if k not in ("func",)}
    payload = {"command": args.command, "config": cfg, "seed": getattr(args, "seed", None)}
    payload.update(extra)
    return payload


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_config_file(args):
    if getattr(args, "config", None):
        with open(args.config) as fh:
            overrides = json.load(fh)
        for key, value in overrides.items():
            setattr(args, key.replace("-", "_"), value)
    return args


def _parse_pair(text):
    parts = [int(p) for p in str(text).split(",")]
    if len(parts) != 2:
        raise ValidationError(f"expected 'l1,l2', got {text!r}")
    return parts[0], parts[1]


def _resolve_boundaries(stack, args):
    if getattr(args, "boundaries", None):
        return _parse_pair(args.boundaries)
    planted = stack.manifest.get("planted_boundaries")
    if planted:
        return tuple(planted)
    res = detect_boundaries(stack, BoundaryConfig(seed=args.seed))
    return res.l1, res.l2


# --------------------------------------------------------------- commands


def cmd_gen_synth(args):
    out = _out_dir(args)
    spec = SyntheticSpec(
        n_layers=args.layers,
        hidden_dim=args.dim,
        n_samples=args.samples,
        seq_len=args.seq,
        n_heads=args.heads,
        planted_boundaries=_parse_pair(args.boundaries),
        span_profile=[float(s) for s in args.span_profile.split(",")] if args.span_profile else [],
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    stack = generate_synthetic(spec)
    manifest_path = write_stack(stack, out / "stack")
    write_json(out / "report.json", _report_payload(args, {"manifest": str(manifest_path)}))
    return 0


def cmd_profile_attention(args):
    out = _out_dir(args)
    stack = read_stack(args.input)
    profile = profile_stack(stack)
    rows = []
    for i in range(profile.n_layers):
        ds = profile.delta_span[i] if i < profile.n_layers - 1 else ""
        rows.append([i + 1, f"{profile.span[i]:.6f}", f"{profile.entropy[i]:.6f}",
                     f"{ds:.6f}" if ds != "" else ""])
    write_csv(out / "attention_profile.csv", ["layer", "span", "entropy", "delta_span"], rows)
    write_json(out / "report.json", _report_payload(args, {
        "spearman_span_depth": profile.spearman_span_depth,
        "span": profile.span,
        "entropy": profile.entropy,
    }))
    if args.svg:
        _plot_lines(out / "attention_profile.svg",
                    {"span": profile.span, "entropy": profile.entropy}, "layer")
    return 0


def cmd_layer_metrics(args):
    out = _out_dir(args)
    stack = read_stack(args.input)
    mi_profile, matrix = adjacent_mi_profile(
        stack, seed=args.seed, full_matrix=args.full_matrix, max_n=args.max_n
    )
    kl_profile = []
    for i in range(stack.n_layers - 1):
        a = np.asarray(stack.hidden[i], dtype=float)
        b = np.asarray(stack.hidden[i + 1], dtype=float)
        basis = pca_fit(np.vstack([a, b]), min(50, a.shape[1]))
        kl_profile.append(gaussian_kl(fit_gaussian(basis.transform(a)),
                                      fit_gaussian(basis.transform(b))))
    rows = [
        [i + 1, f"{mi_profile[i]:.6f}", f"{kl_profile[i]:.6f}"]
        for i in range(stack.n_layers - 1)
    ]
    write_csv(out / "layer_metrics.csv", ["layer", "mi_next", "kl_next"], rows)
    if args.full_matrix:
        write_csv(
            out / "mi_matrix.csv",
            ["layer"] + [str(i + 1) for i in range(stack.n_layers)],
            [[i + 1] + ["" if np.isnan(v) else f"{v:.6f}" for v in matrix[i]]
             for i in range(stack.n_layers)],
        )
    write_json(out / "report.json", _report_payload(args, {
        "mi_profile": mi_profile, "kl_profile": kl_profile,
    }))
    return 0


def cmd_probe(args):
    out = _out_dir(args)
    stack = read_stack(args.input)
    tasks = args.tasks.split(",") if args.tasks else None
    cfg = ProbeConfig(epochs=args.epochs, n_seeds=args.probe_seeds, seed=args.seed)
    result = probe_stack(stack, tasks=tasks, cfg=cfg)
    rows = []
    for li in range(stack.n_layers):
        for ti, task in enumerate(result.tasks):
            grad = f"{result.grad[li, ti]:.6f}" if li < stack.n_layers - 1 else ""
            rows.append([li + 1, task, f"{result.accuracy[li, ti]:.6f}",
                         f"{result.macro_f1[li, ti]:.6f}", grad])
    write_csv(out / "probe_results.csv", ["layer", "task", "acc", "f1", "grad"], rows)
    write_csv(
        out / "probe_accuracy_matrix.csv",
        ["layer"] + list(result.tasks),
        [[li + 1] + [f"{result.accuracy[li, ti]:.6f}" for ti in range(len(result.tasks))]
         for li in range(stack.n_layers)],
    )
    write_json(out / "report.json", _report_payload(args, {
        "tasks": result.tasks, "accuracy": result.accuracy, "macro_f1": result.macro_f1,
    }))
    if args.svg:
        _plot_heatmap(out / "probe_accuracy.svg", result.accuracy, result.tasks)
    return 0


def cmd_detect_boundaries(args):
    out = _out_dir(args)
    stack = read_stack(args.input)
    cfg = BoundaryConfig(
        alpha=args.alpha, beta=args.beta, gamma=args.gamma,
        cv_folds=args.folds, mi_max_n=args.max_n,
        probe=ProbeConfig(epochs=args.epochs, n_seeds=args.probe_seeds),
        seed=args.seed,
    )
    try:
        res = detect_boundaries(stack, cfg)
    except AmbiguousBoundaryError as err:
        write_json(out / "report.json", _report_payload(args, {
            "error": str(err), "trace": getattr(err, "trace", None),
        }))
        raise
    write_json(out / "report.json", _report_payload(args, {
        "l1": res.l1, "l2": res.l2, "cv_std": res.cv_std, "stable": res.stable,
        "scores": res.scores, "channels": res.channels,
        "cv_boundaries": res.cv_boundaries,
    }))
    write_csv(
        out / "boundary_traces.csv",
        ["position", "delta_span", "delta_mi", "probe", "fused", "smoothed"],
        [[i + 1] + [f"{res.channels[k][i]:.6f}" for k in ("delta_span", "delta_mi", "probe", "fused")]
         + [f"{res.scores[i]:.6f}"] for i in range(len(res.scores))],
    )
    if args.svg:
        _plot_lines(out / "boundary_scores.svg", {"score": res.scores}, "position")
    return 0


def _loss_config_from(args):
    return LossConfig(
        lambda_geo=args.lambda_geo, lambda_info=args.lambda_info, lambda_curv=args.lambda_curv,
        lr=args.lr, lr_schedule=args.lr_schedule, epochs=args.epochs,
        batch_size=args.batch_size, map_kind=args.map_kind,
        critic_lr=args.critic_lr, metric_every=args.metric_every,
        heads_enabled=None if args.heads == "auto" else (args.heads == "on"),
        seed=args.seed,
    )


def cmd_train_align(args):
    out = _out_dir(args)
    stack = read_stack(args.input)
    boundaries = _resolve_boundaries(stack, args)
    run = train_alignment(stack, boundaries, _loss_config_from(args))
    epochs = {}
    for step in run.report.steps:
        epochs.setdefault(step["epoch"], []).append(step)
    per_epoch = [
        {
            "epoch": ep,
            "L_geo": float(np.mean([s["L_geo"] for s in steps])),
            "L_info": float(np.mean([s["L_info"] for s in steps])),
            "L_curv": float(np.mean([s["L_curv"] for s in steps])),
            "L_cls": (float(np.mean([s["L_cls"] for s in steps]))
                      if steps[0]["L_cls"] is not None else None),
            "L_total": float(np.mean([s["L_total"] for s in steps])),
        }
        for ep, steps in sorted(epochs.items())
    ]
    write_json(out / "report.json", _report_payload(args, {
        "boundaries": list(run.boundaries),
        "per_epoch_loss": per_epoch,
        "epoch_metrics": run.report.epoch_metrics,
        "final_metrics": run.report.final_metrics,
        "error_budget": run.report.error_budget,
    }))
    write_csv(
        out / "losses.csv",
        ["epoch", "L_geo", "L_info", "L_curv", "L_cls", "L_total"],
        [[e["epoch"], e["L_geo"], e["L_info"], e["L_curv"],
          "" if e["L_cls"] is None else e["L_cls"], e["L_total"]] for e in per_epoch],
    )
    return 0


_TABLE_COLUMNS = ["group", "KL_gm", "KL_ml", "MI_gm", "MI_ml", "DC_gm", "DC_ml"]


def cmd_ablate(args):
    out = _out_dir(args)
    stack = read_stack(args.input)
    boundaries = _resolve_boundaries(stack, args)
    grid = default_ablation_grid()
    if args.groups:
        wanted = args.groups.split(",")
        missing = [g for g in wanted if g not in grid]
        if missing:
            raise ValidationError(f"unknown ablation groups: {missing}")
        grid = {g: grid[g] for g in wanted}
    table = run_ablation(stack, grid=grid, boundaries=boundaries, cfg=_loss_config_from(args))
    write_json(out / "report.json", _report_payload(args, table))
    write_csv(
        out / "ablation.csv",
        _TABLE_COLUMNS,
        [
            [row.get("group")]
            + [
                "" if row.get(c) is None else f"{row[c]:.6f}"
                for c in _TABLE_COLUMNS[1:]
            ]
            for row in table["rows"]
        ],
    )
    return 0


def cmd_intervene(args):
    out = _out_dir(args)
    stack = read_stack(args.input)
    boundaries = _resolve_boundaries(stack, args)
    delta = None
    if args.delta_file:
        delta = np.loadtxt(args.delta_file, delimiter=",", ndmin=1)
    spec = InterventionSpec(
        scale=args.scale, kind=args.kind, delta=delta,
        alpha=args.alpha, sigma=args.sigma, tau=args.tau,
        magnitude=args.magnitude, seed=args.seed,
    )
    perturbed = apply_to_stack(stack, spec, boundaries)
    manifest_path = write_stack(perturbed, out / "stack")
    write_json(out / "report.json", _report_payload(args, {
        "boundaries": list(boundaries),
        "layers": resolve_layers(args.scale, boundaries, stack.n_layers),
        "manifest": str(manifest_path),
    }))
    return 0


def cmd_stats(args):
    out = _out_dir(args)
    baseline, intervened = {}, {}
    with open(args.pairs, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"run_id", "metric", "baseline", "intervened"}
        if not need <= set(reader.fieldnames or []):
            raise ValidationError(f"pairs CSV needs columns {sorted(need)}")
        rows = sorted(reader, key=lambda r: (r["metric"], int(r["run_id"])))
    for row in rows:
        baseline.setdefault(row["metric"], []).append(float(row["baseline"]))
        intervened.setdefault(row["metric"], []).append(float(row["intervened"]))
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    report = run_effect_study(
        {k: np.array(v) for k, v in baseline.items()},
        {k: np.array(v) for k, v in intervened.items()},
        StudyConfig(seed=args.seed),
        lexicon=lexicon,
    )
    write_json(out / "report.json", _report_payload(args, {
        "repetitions": report.repetitions, "rows": report.rows,
    }))
    write_csv(
        out / "effects.csv",
        ["metric", "median_change_pct", "cliffs_delta", "p", "p_adjusted", "ci_lo", "ci_hi", "significance"],
        [[r["metric"], f"{r['median_change_pct']:.6f}", f"{r['cliffs_delta']:.6f}",
          f"{r['p']:.6g}", f"{r['p_adjusted']:.6g}", f"{r['ci_lo']:.6f}", f"{r['ci_hi']:.6f}",
          r["significance"]] for r in report.rows],
    )
    return 0


def cmd_report(args):
    out = _out_dir(args)
    if not args.runs:
        raise ValidationError("no run directories given")
    rows = []
    seen = {}
    for run_dir in args.runs:
        path = Path(run_dir) / "report.json"
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            print(f"warning: skipping {run_dir}: {err}", file=sys.stderr)
            continue
        for row in payload.get("rows", []):
            if "group" not in row:
                continue
            name = row["group"]
            seen[name] = seen.get(name, 0) + 1
            if seen[name] > 1:
                row = dict(row, group=f"{name}#{seen[name]}")
            rows.append(row)
    if not rows:
        raise ValidationError("no table rows found in the given run directories")
    rows.sort(key=lambda r: r["group"])
    write_csv(
        out / "combined.csv",
        _TABLE_COLUMNS,
        [[r.get("group")] + [
            "" if r.get(c) is None else (f"{r[c]:.6f}" if isinstance(r.get(c), float) else str(r.get(c)))
            for c in _TABLE_COLUMNS[1:]
        ] for r in rows],
    )
    lines = ["# Combined alignment report", "", "| " + " | ".join(_TABLE_COLUMNS) + " |",
             "|" + "---|" * len(_TABLE_COLUMNS)]
    for r in rows:
        cells = [str(r.get("group"))] + [
            "" if r.get(c) is None else (f"{r[c]:.4g}" if isinstance(r.get(c), float) else str(r.get(c)))
            for c in _TABLE_COLUMNS[1:]
        ]
        lines.append("| " + " | ".join(cells) + " |")
    (out / "combined.md").write_text("\n".join(lines) + "\n")
    write_json(out / "report.json", _report_payload(args, {"rows": rows}))
    return 0


# --------------------------------------------------------------- plotting


def _plot_lines(path, series, xlabel):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for name, values in series.items():
        ax.plot(range(1, len(values) + 1), values, marker="o", label=name)
    ax.set_xlabel(xlabel)
    ax.legend()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _plot_heatmap(path, matrix, columns):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(np.asarray(matrix), aspect="auto", origin="lower")
    ax.set_xticks(range(len(columns)), columns)
    ax.set_xlabel("task")
    ax.set_ylabel("layer")
    fig.colorbar(im)
    fig.savefig(path, format="svg")
    plt.close(fig)


# --------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="msma", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, seed_required=True):
        sp = sub.add_parser(name)
        sp.set_defaults(func=fn)
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--config", help="JSON file overriding any flag")
        sp.add_argument("--seed", type=int, required=seed_required, default=None)
        sp.add_argument("-v", "--verbose", action="count", default=0)
        return sp

    sp = add("gen-synth", cmd_gen_synth)
    sp.add_argument("--layers", type=int, default=12)
    sp.add_argument("--dim", type=int, default=32)
    sp.add_argument("--samples", type=int, default=1024)
    sp.add_argument("--seq", type=int, default=128)
    sp.add_argument("--heads", type=int, default=4)
    sp.add_argument("--boundaries", default="2,8")
    sp.add_argument("--noise-sigma", type=float, default=0.03)
    sp.add_argument("--span-profile", default=None)

    sp = add("profile-attention", cmd_profile_attention, seed_required=False)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--svg", action="store_true")

    sp = add("layer-metrics", cmd_layer_metrics)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--full-matrix", action="store_true")
    sp.add_argument("--max-n", type=int, default=None)

    sp = add("probe", cmd_probe)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--tasks", default=None)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--probe-seeds", type=int, default=5)
    sp.add_argument("--svg", action="store_true")

    sp = add("detect-boundaries", cmd_detect_boundaries)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--alpha", type=float, default=0.4)
    sp.add_argument("--beta", type=float, default=0.4)
    sp.add_argument("--gamma", type=float, default=0.2)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--probe-seeds", type=int, default=5)
    sp.add_argument("--max-n", type=int, default=None)
    sp.add_argument("--svg", action="store_true")

    def add_training_flags(sp):
        sp.add_argument("--in", dest="input", required=True)
        sp.add_argument("--boundaries", default=None, help="l1,l2 (default: manifest or detection)")
        sp.add_argument("--lambda-geo", type=float, default=0.1)
        sp.add_argument("--lambda-info", type=float, default=0.1)
        sp.add_argument("--lambda-curv", type=float, default=0.01)
        sp.add_argument("--lr", type=float, default=2e-5)
        sp.add_argument("--lr-schedule", choices=["constant", "cosine"], default="constant")
        sp.add_argument("--critic-lr", type=float, default=1e-4)
        sp.add_argument("--epochs", type=int, default=15)
        sp.add_argument("--batch-size", type=int, default=128)
        sp.add_argument("--map-kind", choices=["linear", "mlp"], default="linear")
        sp.add_argument("--metric-every", type=int, default=1)
        sp.add_argument("--heads", choices=["auto", "on", "off"], default="auto")

    sp = add("train-align", cmd_train_align)
    add_training_flags(sp)

    sp = add("ablate", cmd_ablate)
    add_training_flags(sp)
    sp.add_argument("--groups", default=None, help="comma list; default full grid")

    sp = add("intervene", cmd_intervene)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--boundaries", default=None)
    sp.add_argument("--scale", choices=["local", "intermediate", "global"], required=True)
    sp.add_argument("--kind", choices=["translate", "scale", "noise", "attention"], required=True)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--sigma", type=float, default=0.0)
    sp.add_argument("--tau", type=float, default=1.0)
    sp.add_argument("--magnitude", type=float, default=1.0)
    sp.add_argument("--delta-file", default=None)

    sp = add("stats", cmd_stats)
    sp.add_argument("--pairs", required=True, help="CSV: run_id,metric,baseline,intervened")
    sp.add_argument("--lexicon", default=None)

    sp = add("report", cmd_report, seed_required=False)
    sp.add_argument("--runs", nargs="*", default=[])

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        _apply_config_file(args)
        return args.func(args) or 0
    except (ValidationError, FormatError, FileNotFoundError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except AmbiguousBoundaryError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failures
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
