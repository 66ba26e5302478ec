from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from msma.errors import ValidationError
from msma.intervention import (
    bh_fdr,
    bootstrap_ci,
    cliffs_delta,
    run_effect_study,
    text_metrics,
    wilcoxon_signed_rank,
)


def brute_cliffs(x, y):
    gt = sum(1 for a in x for b in y if a > b)
    lt = sum(1 for a in x for b in y if a < b)
    return (gt - lt) / (len(x) * len(y))


def brute_wilcoxon(diffs):
    d = np.asarray(diffs, dtype=float)
    d = d[d != 0]
    ranks = rankdata(np.abs(d))
    w = ranks[d > 0].sum()
    n_le = n_ge = 0
    for signs in product((0, 1), repeat=len(d)):
        wp = sum(r for s, r in zip(signs, ranks) if s)
        n_le += wp <= w
        n_ge += wp >= w
    total = 2 ** len(d)
    return min(1.0, 2 * min(n_le, n_ge) / total)


class TestCliffsDelta:
    def test_complete_dominance(self):
        assert cliffs_delta([4, 5, 6], [1, 2, 3]) == 1.0

    def test_identical_samples(self):
        assert cliffs_delta([1, 2, 3], [1, 2, 3]) == 0.0

    def test_hand_computed(self):
        assert cliffs_delta([1, 3], [2, 4]) == -0.5

    def test_antisymmetry_and_bounds(self, rng):
        for _ in range(50):
            x = rng.normal(size=rng.integers(1, 8))
            y = rng.normal(size=rng.integers(1, 8))
            d = cliffs_delta(x, y)
            assert -1.0 <= d <= 1.0
            assert d == -cliffs_delta(y, x)

    @settings(max_examples=60, deadline=None)
    @given(
        x=st.lists(st.integers(-5, 5), min_size=1, max_size=8),
        y=st.lists(st.integers(-5, 5), min_size=1, max_size=8),
    )
    def test_matches_exhaustive_counting(self, x, y):
        assert cliffs_delta(x, y) == pytest.approx(brute_cliffs(x, y))

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            cliffs_delta([], [1])


class TestWilcoxon:
    def test_all_positive_n6(self):
        assert wilcoxon_signed_rank([1, 2, 3, 4, 5, 6]) == pytest.approx(2 / 64)

    def test_symmetric_pairs(self):
        assert wilcoxon_signed_rank([1, -1, 2, -2, 3, -3]) == 1.0

    def test_large_n_shifted(self, rng):
        assert wilcoxon_signed_rank(rng.normal(1.0, 1.0, size=200)) < 1e-3

    def test_all_zero_rejected(self):
        with pytest.raises(ValidationError):
            wilcoxon_signed_rank([0.0, 0.0, 0.0])

    def test_too_few_rejected(self):
        with pytest.raises(ValidationError):
            wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0])

    @settings(max_examples=60, deadline=None)
    @given(
        diffs=st.lists(
            st.floats(-5, 5).filter(lambda v: abs(v) > 1e-6), min_size=5, max_size=12
        )
    )
    def test_exact_matches_enumeration(self, diffs):
        assert wilcoxon_signed_rank(diffs) == pytest.approx(brute_wilcoxon(diffs))

    def test_normal_approx_close_to_exact_at_cutover(self, rng):
        # n=25 exact vs n=26 approximation should be smooth
        d = rng.normal(0.4, 1.0, size=25)
        exact = wilcoxon_signed_rank(d)
        approx = wilcoxon_signed_rank(np.append(d, 1e-9))  # 26 nonzero
        assert abs(exact - approx) < 0.05


class TestBhFdr:
    def test_single_value_unchanged(self):
        assert bh_fdr([0.03]) == pytest.approx([0.03])

    def test_hand_computed_step_up(self):
        assert bh_fdr([0.01, 0.02, 0.03, 0.04]) == pytest.approx([0.04, 0.04, 0.04, 0.04])

    def test_output_at_least_input(self, rng):
        p = rng.uniform(1e-6, 1.0, size=25)
        adj = bh_fdr(p)
        assert np.all(adj >= p - 1e-15)

    def test_monotone_in_rank(self, rng):
        p = np.sort(rng.uniform(1e-6, 1.0, size=12))
        adj = bh_fdr(p)
        assert np.all(np.diff(adj) >= -1e-15)

    def test_idempotent_on_collapsed_adjusted(self):
        # step-up output that collapsed to its plateau is a fixed point
        once = bh_fdr([0.01, 0.02, 0.03, 0.04])
        assert np.allclose(bh_fdr(once), once)
        flat = bh_fdr([0.2, 0.2, 0.2])
        assert np.allclose(bh_fdr(flat), flat)

    def test_invalid_pvalues(self):
        with pytest.raises(ValidationError):
            bh_fdr([0.0, 0.5])


class TestBootstrap:
    def test_constant_samples(self):
        lo, hi = bootstrap_ci(np.mean, np.full(15, 2.5), reps=100, seed=0)
        assert lo == pytest.approx(2.5)
        assert hi == pytest.approx(2.5)

    def test_insufficient_resamples(self):
        with pytest.raises(ValidationError, match="insufficient resamples"):
            bootstrap_ci(np.mean, np.arange(12.0), reps=1)

    def test_needs_ten_samples(self):
        with pytest.raises(ValidationError):
            bootstrap_ci(np.mean, np.arange(5.0))

    def test_deterministic(self, rng):
        x = rng.normal(size=50)
        assert bootstrap_ci(np.mean, x, seed=4) == bootstrap_ci(np.mean, x, seed=4)


class TestTextMetrics:
    def test_lexical_diversity(self):
        assert text_metrics("a b a b")["lexical_diversity"] == 0.5

    def test_sentence_count(self):
        assert text_metrics("Hi. Go. Stop.")["sentence_count"] == 3.0

    def test_identical_sentences_coherence(self):
        assert text_metrics("the cat sat. the cat sat.")["coherence"] == pytest.approx(1.0)

    def test_sentiment_from_lexicon(self):
        lex = {"good": 1.0, "bad": -1.0}
        m = text_metrics("good good bad day.", lexicon=lex)
        assert m["sentiment"] == pytest.approx((1 + 1 - 1) / 3)

    def test_dependency_depth_passthrough(self):
        m = text_metrics("One sentence here.", dependency_depth=7)
        assert m["max_dependency_depth"] == 7.0

    def test_empty_text_rejected(self):
        with pytest.raises(ValidationError, match="empty text"):
            text_metrics("   ")


def test_load_lexicon_csv(tmp_path):
    from msma.intervention import load_lexicon

    path = tmp_path / "lex.csv"
    path.write_text("# comment\ngood,1.0\nBad,-0.5\n")
    lex = load_lexicon(path)
    assert lex == {"good": 1.0, "bad": -0.5}


def test_fdr_keeps_single_true_effect_with_power():
    # 6 metrics, one planted effect: BH keeps it at typical noise levels
    detected = 0
    false_hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        base = {f"m{i}": rng.normal(10, 1, size=30) for i in range(6)}
        inter = {k: v + rng.normal(0, 0.5, size=30) for k, v in base.items()}
        inter["m0"] = base["m0"] + 1.0 + rng.normal(0, 0.5, size=30)
        rep = run_effect_study(base, inter)
        row = rep.row("m0")
        detected += row["p_adjusted"] < 0.05
        false_hits += sum(
            r["p_adjusted"] < 0.05 for r in rep.rows if r["metric"] != "m0"
        )
    assert detected >= 80, f"power {detected}/100"
    assert false_hits <= 5 * 100 * 0.05 * 3  # loose false-positive sanity bound


class TestEffectStudy:
    def test_identity_run(self, rng):
        base = {"m1": rng.normal(size=30), "m2": rng.normal(size=30)}
        rep = run_effect_study(base, {k: v.copy() for k, v in base.items()})
        for row in rep.rows:
            assert row["cliffs_delta"] == 0.0
            assert row["p"] == 1.0
            assert row["significance"] == ""

    def test_planted_sentence_count_shift(self, rng):
        base = rng.normal(10.0, 0.5, size=30)
        shifted = base * 1.25 + rng.normal(0, 0.1, size=30)
        rep = run_effect_study({"sentence_count": base}, {"sentence_count": shifted})
        row = rep.row("sentence_count")
        assert row["cliffs_delta"] > 0
        assert row["p_adjusted"] < 0.05
        assert 20 < row["median_change_pct"] < 30

    def test_unpaired_lengths_rejected(self, rng):
        with pytest.raises(ValidationError, match="unpaired"):
            run_effect_study({"m": rng.normal(size=10)}, {"m": rng.normal(size=12)})

    def test_texts_accepted(self):
        base = ["One two three. Four five.", "Alpha beta. Gamma delta."] * 5
        inter = ["One two three. Four five. Six seven.", "Alpha beta. Gamma delta. Epsilon."] * 5
        rep = run_effect_study(base, inter)
        assert rep.row("sentence_count")["median_change_pct"] == pytest.approx(50.0)
