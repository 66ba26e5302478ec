import numpy as np
import pytest

from msma.repr_store import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def small_stack():
    """Shared planted stack, cheap enough for unit tests."""
    return generate_synthetic(SyntheticSpec(n_samples=320, hidden_dim=24, seed=101))


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
