import numpy as np
import pytest

from msma.attention import profile_stack
from msma.errors import ValidationError
from msma.repr_store import SyntheticSpec, attention_for_span, default_span_profile, generate_synthetic


def test_seeded_determinism():
    spec = dict(n_layers=12, planted_boundaries=(2, 8), n_samples=64, hidden_dim=24, seed=7)
    a = generate_synthetic(SyntheticSpec(**spec))
    b = generate_synthetic(SyntheticSpec(**spec))
    assert all(np.array_equal(x, y) for x, y in zip(a.hidden, b.hidden))
    assert all(np.array_equal(x, y) for x, y in zip(a.attention, b.attention))
    assert all(np.array_equal(a.labels[t], b.labels[t]) for t in a.labels)


def test_measured_spans_match_profile(small_stack):
    profile = profile_stack(small_stack)
    targets = np.array(small_stack.manifest["span_profile"])
    assert np.all(np.abs(profile.span - targets) / targets < 0.05)


def test_infeasible_span_error():
    with pytest.raises(ValidationError, match="infeasible"):
        generate_synthetic(
            SyntheticSpec(
                n_samples=16, hidden_dim=24, seq_len=64,
                span_profile=[12.0] * 11 + [200.0], seed=0,
            )
        )


def test_attention_rows_stochastic_to_1e6(small_stack):
    for A in small_stack.attention:
        assert np.max(np.abs(A.sum(axis=-1) - 1.0)) < 1e-6


def test_attention_for_span_hits_target_exactly():
    for target in [0.0, 1.3, 12.5, 30.0]:
        A = attention_for_span(128, target)
        idx = np.arange(128)
        dist = np.abs(idx[:, None] - idx[None, :])
        measured = (A * dist).sum() / 128
        assert abs(measured - target) < 1e-9


def test_default_profile_monotone_with_boundary_steps():
    prof = np.array(default_span_profile(12, (2, 8)))
    assert np.all(np.diff(prof) >= 0)
    steps = np.diff(prof)
    assert np.argmax(steps) in (1, 7)  # largest jumps at the boundaries


def test_span_step_at_l1(small_stack):
    profile = profile_stack(small_stack)
    l1, l2 = small_stack.manifest["planted_boundaries"]
    top2 = np.argsort(profile.delta_span)[-2:] + 1
    assert {l1, l2} == set(top2.tolist())


def test_boundary_validation():
    with pytest.raises(ValidationError):
        SyntheticSpec(planted_boundaries=(8, 2))
    with pytest.raises(ValidationError):
        SyntheticSpec(planted_boundaries=(2, 12), n_layers=12)  # empty global range
