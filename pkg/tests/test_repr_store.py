import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msma.errors import FormatError, ValidationError
from msma.repr_store import LayerStack, make_manifest, read_stack, read_tensor, write_stack, write_tensor


def make_stack(n_layers=2, n=3, d=4, with_attention=False, with_labels=False, seed=0):
    rng = np.random.default_rng(seed)
    hidden = [rng.normal(size=(n, d)).astype(np.float32) for _ in range(n_layers)]
    attention = None
    if with_attention:
        attention = []
        for _ in range(n_layers):
            A = rng.uniform(0.1, 1.0, size=(2, 5, 5)).astype(np.float32)
            A /= A.sum(axis=-1, keepdims=True)
            attention.append(A)
    labels = {"topic": rng.integers(0, 3, size=n)} if with_labels else None
    stack = LayerStack(hidden=hidden, attention=attention, labels=labels, manifest={})
    tasks = [{"name": "topic", "classes": 3}] if with_labels else []
    stack.manifest = make_manifest(stack, tasks=tasks)
    return stack


class TestTensorFile:
    def test_round_trip_bit_exact(self, tmp_path):
        arr = np.random.default_rng(1).normal(size=(3, 4, 2)).astype(np.float32)
        path = tmp_path / "t.msma"
        write_tensor(path, arr)
        back = read_tensor(path)
        assert back.dtype == np.float32
        assert np.array_equal(back, arr)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.msma"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(FormatError, match="magic"):
            read_tensor(path)

    def test_payload_size_mismatch(self, tmp_path):
        path = tmp_path / "t.msma"
        write_tensor(path, np.zeros((2, 3), dtype=np.float32))
        raw = path.read_bytes()
        path.write_bytes(raw[:-4])  # 20 payload bytes instead of 24
        with pytest.raises(FormatError, match="payload size mismatch"):
            read_tensor(path)

    def test_truncated_header_reports_offset(self, tmp_path):
        path = tmp_path / "t.msma"
        write_tensor(path, np.zeros((2, 2), dtype=np.float32))
        path.write_bytes(path.read_bytes()[:10])  # cut inside the shape block
        with pytest.raises(FormatError, match="unexpected EOF at offset"):
            read_tensor(path)

    def test_rank_limit(self, tmp_path):
        with pytest.raises(FormatError, match="rank"):
            write_tensor(tmp_path / "t.msma", np.zeros((1, 1, 1, 1, 1), dtype=np.float32))


class TestStackIO:
    def test_round_trip(self, tmp_path):
        stack = make_stack(with_attention=True, with_labels=True)
        write_stack(stack, tmp_path / "dump")
        back = read_stack(tmp_path / "dump")
        assert back.n_layers == stack.n_layers
        for a, b in zip(back.hidden, stack.hidden):
            assert np.array_equal(a, b)
        for a, b in zip(back.attention, stack.attention):
            assert np.array_equal(a, b)
        assert np.array_equal(back.labels["topic"], stack.labels["topic"])
        assert back.manifest == stack.manifest

    def test_missing_layer_file(self, tmp_path):
        stack = make_stack(n_layers=3)
        write_stack(stack, tmp_path / "dump")
        (tmp_path / "dump" / "layer_3.msma").unlink()
        with pytest.raises(ValidationError, match="layer_3.msma is missing"):
            read_stack(tmp_path / "dump")

    def test_manifest_layer_count_checked(self, tmp_path):
        stack = make_stack(n_layers=2)
        write_stack(stack, tmp_path / "dump")
        manifest = json.loads((tmp_path / "dump" / "manifest.json").read_text())
        manifest["n_layers"] = 3
        (tmp_path / "dump" / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ValidationError):
            read_stack(tmp_path / "dump")

    def test_non_stochastic_attention(self, tmp_path):
        stack = make_stack(with_attention=True)
        stack.attention[0][0, 0, :] *= 0.8
        with pytest.raises(ValidationError, match="attention not row-stochastic"):
            write_stack(stack, tmp_path / "dump")

    def test_shape_mismatch_names_field(self):
        stack = make_stack()
        stack.hidden[1] = stack.hidden[1][:, :2]
        with pytest.raises(ValidationError, match="hidden: layer 2"):
            stack.validate()

    @settings(max_examples=20, deadline=None)
    @given(
        n_layers=st.integers(1, 3),
        n=st.integers(1, 6),
        d=st.integers(1, 5),
        seed=st.integers(0, 10_000),
    )
    def test_round_trip_property(self, tmp_path_factory, n_layers, n, d, seed):
        stack = make_stack(n_layers=n_layers, n=n, d=d, seed=seed)
        out = tmp_path_factory.mktemp("rt")
        write_stack(stack, out)
        back = read_stack(out)
        assert all(np.array_equal(a, b) for a, b in zip(back.hidden, stack.hidden))

    def test_committed_fixture_parses(self):
        # binary fixture pinned in the repo: guards the on-disk format
        # against accidental reader/writer drift
        from pathlib import Path

        fixture = Path(__file__).parent / "fixtures" / "tiny_stack"
        stack = read_stack(fixture)
        assert stack.n_layers == stack.manifest["n_layers"] == 2
        assert stack.n_samples == 3 and stack.hidden_dim == 4
        assert np.allclose(stack.hidden[0][0], [0.487, -1.46, -0.147, -1.098], atol=1e-6)
        assert np.array_equal(stack.labels["topic"], [0, 2, 1])
        assert stack.attention[0].shape == (1, 5, 5)
