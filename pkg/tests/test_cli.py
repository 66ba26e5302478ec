import csv
import json

import numpy as np
import pytest

from msma.cli import main
from msma.repr_store import read_stack


@pytest.fixture(scope="module")
def gen_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "gen"
    code = main([
        "gen-synth", "--layers", "12", "--boundaries", "2,8",
        "--samples", "256", "--dim", "24", "--seed", "7", "--out", str(out),
    ])
    assert code == 0
    return out


def test_gen_synth_deterministic(tmp_path, gen_dir):
    out2 = tmp_path / "gen2"
    assert main([
        "gen-synth", "--layers", "12", "--boundaries", "2,8",
        "--samples", "256", "--dim", "24", "--seed", "7", "--out", str(out2),
    ]) == 0
    for name in sorted(p.name for p in (gen_dir / "stack").iterdir()):
        a = (gen_dir / "stack" / name).read_bytes()
        b = (out2 / "stack" / name).read_bytes()
        assert a == b, name


def test_detect_boundaries_on_generated(tmp_path, gen_dir):
    out = tmp_path / "db"
    assert main([
        "detect-boundaries", "--in", str(gen_dir / "stack"), "--out", str(out),
        "--seed", "3", "--epochs", "50", "--probe-seeds", "1", "--max-n", "192",
    ]) == 0
    report = json.loads((out / "report.json").read_text())
    assert (report["l1"], report["l2"]) == (2, 8)
    assert report["seed"] == 3


def test_unknown_flag_exits_1(gen_dir, capsys):
    assert main(["gen-synth", "--nonsense", "1", "--seed", "1", "--out", "x"]) == 1


def test_missing_seed_exits_1():
    assert main(["gen-synth", "--out", "x"]) == 1


def test_profile_attention_csv(tmp_path, gen_dir):
    out = tmp_path / "pa"
    assert main(["profile-attention", "--in", str(gen_dir / "stack"), "--out", str(out)]) == 0
    rows = list(csv.reader((out / "attention_profile.csv").open()))
    assert rows[0] == ["layer", "span", "entropy", "delta_span"]
    assert len(rows) == 13
    assert abs(float(rows[1][1]) - 12.5) < 1e-6


def test_intervene_scales_target_range(tmp_path, gen_dir):
    out = tmp_path / "iv"
    assert main([
        "intervene", "--in", str(gen_dir / "stack"), "--out", str(out),
        "--seed", "5", "--scale", "intermediate", "--kind", "scale", "--alpha", "2.0",
    ]) == 0
    base = read_stack(gen_dir / "stack")
    pert = read_stack(out / "stack")
    ratio = np.linalg.norm(pert.hidden[4]) / np.linalg.norm(base.hidden[4])
    assert abs(ratio - 2.0) < 1e-5
    assert np.array_equal(pert.hidden[0], base.hidden[0])


def test_stats_command(tmp_path):
    pairs = tmp_path / "pairs.csv"
    rng = np.random.default_rng(0)
    with open(pairs, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "metric", "baseline", "intervened"])
        for i in range(30):
            b = rng.normal(10, 1)
            w.writerow([i, "sentence_count", b, b * 1.25])
    out = tmp_path / "stats"
    assert main(["stats", "--pairs", str(pairs), "--out", str(out), "--seed", "2"]) == 0
    report = json.loads((out / "report.json").read_text())
    row = report["rows"][0]
    assert row["p_adjusted"] < 0.05
    assert row["cliffs_delta"] > 0


def test_layer_metrics_csv(tmp_path, gen_dir):
    out = tmp_path / "lm"
    assert main([
        "layer-metrics", "--in", str(gen_dir / "stack"), "--out", str(out),
        "--seed", "4", "--max-n", "160",
    ]) == 0
    rows = list(csv.reader((out / "layer_metrics.csv").open()))
    assert rows[0] == ["layer", "mi_next", "kl_next"]
    assert len(rows) == 12  # L-1 transitions
    mi = np.array([float(r[1]) for r in rows[1:]])
    assert mi[1] < mi[0]  # adjacent MI drops across the planted boundary


def test_report_full_grid_is_18_rows(tmp_path):
    from msma.alignment import default_ablation_grid

    run = tmp_path / "ablrun"
    run.mkdir()
    rows = [
        {"group": g, "KL_gm": 1.0, "KL_ml": 1.0, "MI_gm": 0.1, "MI_ml": 0.1,
         "DC_gm": 0.9, "DC_ml": 0.9}
        for g in default_ablation_grid()
    ]
    (run / "report.json").write_text(json.dumps({"rows": rows}))
    out = tmp_path / "combined"
    assert main(["report", "--runs", str(run), "--out", str(out)]) == 0
    combined = list(csv.reader((out / "combined.csv").open()))
    assert len(combined) == 19  # header + 8 groups + 10 sweep rows


def test_report_combines_and_disambiguates(tmp_path):
    run = tmp_path / "runA"
    run.mkdir()
    rows = [{"group": "full_msma", "KL_gm": 1.0, "KL_ml": 2.0,
             "MI_gm": 0.5, "MI_ml": 0.4, "DC_gm": 0.99, "DC_ml": 0.98}]
    (run / "report.json").write_text(json.dumps({"rows": rows}))
    run2 = tmp_path / "runB"
    run2.mkdir()
    (run2 / "report.json").write_text(json.dumps({"rows": rows}))
    out = tmp_path / "combined"
    assert main(["report", "--runs", str(run), str(run2), "--out", str(out)]) == 0
    combined = list(csv.reader((out / "combined.csv").open()))
    groups = [r[0] for r in combined[1:]]
    assert groups == ["full_msma", "full_msma#2"]
    assert (out / "combined.md").exists()


def test_report_empty_exits_1(tmp_path):
    assert main(["report", "--runs", "--out", str(tmp_path / "rep")]) == 1


def test_config_file_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"samples": 64}))
    out = tmp_path / "gen"
    assert main([
        "gen-synth", "--samples", "999", "--dim", "24", "--seed", "1",
        "--config", str(cfg), "--out", str(out),
    ]) == 0
    stack = read_stack(out / "stack")
    assert stack.n_samples == 64
