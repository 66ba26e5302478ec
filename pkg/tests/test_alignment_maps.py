import numpy as np
import pytest

from msma.alignment import LossConfig, fit_linear_map, fit_procrustes, train_mlp_map
from msma.alignment.maps import MlpMap
from msma.errors import ValidationError


class TestLinearMap:
    def test_exact_recovery(self, rng):
        X = rng.normal(size=(200, 6))
        W0 = rng.normal(size=(6, 4))
        m = fit_linear_map(X, X @ W0)
        assert np.max(np.abs(m.apply(X) - X @ W0)) < 1e-8

    def test_noise_floor(self, rng):
        X = rng.normal(size=(4000, 6))
        W0 = rng.normal(size=(6, 4))
        Y = X @ W0 + 0.1 * rng.normal(size=(4000, 4))
        m = fit_linear_map(X, Y)
        mse = float(((m.apply(X) - Y) ** 2).sum(axis=1).mean())
        assert 0.8 * 0.01 * 4 < mse < 1.2 * 0.01 * 4

    def test_underdetermined_requires_ridge(self, rng):
        X = rng.normal(size=(5, 10))
        Y = rng.normal(size=(5, 3))
        with pytest.raises(ValidationError, match="singular"):
            fit_linear_map(X, Y, ridge=0.0)
        m = fit_linear_map(X, Y, ridge=1e-3)
        assert np.isfinite(m.W).all()


class TestProcrustes:
    def test_recovers_rotation(self, rng):
        X = rng.normal(size=(300, 5))
        R = np.linalg.qr(rng.normal(size=(5, 5)))[0]
        m = fit_procrustes(X, X @ R)
        assert np.max(np.abs(m.apply(X) - X @ R)) < 1e-6

    def test_identity_fit(self, rng):
        X = rng.normal(size=(100, 4))
        m = fit_procrustes(X, X)
        assert np.max(np.abs(m.Q - np.eye(4))) < 1e-8
        assert abs(m.scale - 1.0) < 1e-8
        assert np.max(np.abs(m.offset)) < 1e-8

    def test_reflection_allowed(self, rng):
        X = rng.normal(size=(200, 3))
        F = np.diag([1.0, 1.0, -1.0])
        m = fit_procrustes(X, X @ F)
        assert np.linalg.det(m.Q) < 0
        assert np.max(np.abs(m.apply(X) - X @ F)) < 1e-8

    def test_orthogonality_invariant(self, rng):
        for seed in range(5):
            r = np.random.default_rng(seed)
            X = r.normal(size=(50, 4))
            Y = r.normal(size=(50, 4))
            m = fit_procrustes(X, Y)
            assert np.max(np.abs(m.Q.T @ m.Q - np.eye(4))) < 1e-8

    def test_refit_aligned_residual_tiny(self, rng):
        X = rng.normal(size=(150, 4))
        R = np.linalg.qr(rng.normal(size=(4, 4)))[0]
        Y = 1.7 * X @ R + 0.3
        first = fit_procrustes(X, Y)
        second = fit_procrustes(first.apply(X), Y)
        assert float(((second.apply(first.apply(X)) - Y) ** 2).mean()) <= 1e-10

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValidationError):
            fit_procrustes(rng.normal(size=(40, 3)), rng.normal(size=(40, 4)))


def quick_cfg(**kw):
    base = dict(
        lambda_geo=1.0, lambda_info=0.0, lambda_curv=0.0,
        lr=1e-2, lr_schedule="cosine", epochs=40, batch_size=64,
        metric_every=0, seed=5,
    )
    base.update(kw)
    return LossConfig(**base)


class TestMlpMap:
    def test_linear_target_matches_linear_residual(self, rng):
        X = rng.normal(size=(512, 6))
        W0 = rng.normal(size=(6, 6))
        Y = X @ W0 + 0.1 * rng.normal(size=(512, 6))  # realizable up to noise
        linear_mse = float(((fit_linear_map(X, Y).apply(X) - Y) ** 2).sum(axis=1).mean())
        m, _ = train_mlp_map(X, Y, quick_cfg(epochs=200, lr=2e-2))
        mlp_mse = float(((m.apply(X) - Y) ** 2).sum(axis=1).mean())
        assert mlp_mse <= linear_mse * 1.1

    def test_nonlinear_target_beats_linear(self, rng):
        X = rng.normal(size=(512, 6))
        W0 = rng.normal(size=(6, 6))
        Y = np.sin(X @ W0)
        linear_mse = float(((fit_linear_map(X, Y).apply(X) - Y) ** 2).sum(axis=1).mean())
        m, _ = train_mlp_map(X, Y, quick_cfg(epochs=150))
        mlp_mse = float(((m.apply(X) - Y) ** 2).sum(axis=1).mean())
        assert mlp_mse < linear_mse

    def test_zero_epochs_is_identity(self, rng):
        X = rng.normal(size=(300, 5))
        Y = rng.normal(size=(300, 5))
        m, _ = train_mlp_map(X, Y, quick_cfg(epochs=0))
        assert np.max(np.abs(m.apply(X) - X)) < 1e-12

    def test_identity_init_direct(self, rng):
        m = MlpMap(4, 4, seed=0)
        X = rng.normal(size=(50, 4))
        assert np.max(np.abs(m.apply(X) - X)) < 1e-12
