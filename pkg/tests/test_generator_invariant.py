"""Generator ground-truth invariant: probe peaks land in the planted
regimes on at least 95 of 100 seeds."""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from msma.alignment.training import worker_count
from msma.probing import ProbeConfig, probe_stack
from msma.repr_store import SyntheticSpec, generate_synthetic


def _peaks(seed):
    stack = generate_synthetic(SyntheticSpec(n_samples=256, hidden_dim=24, seed=seed))
    res = probe_stack(stack, cfg=ProbeConfig(n_seeds=1, epochs=35, seed=7000 + seed))
    local_peak = int(np.argmax(res.accuracy[:, res.tasks.index("local")])) + 1
    global_peak = int(np.argmax(res.accuracy[:, res.tasks.index("global")])) + 1
    return local_peak, global_peak


def test_probe_peaks_inside_planted_regimes():
    seeds = list(range(100))
    with ProcessPoolExecutor(max_workers=worker_count(len(seeds))) as pool:
        peaks = list(pool.map(_peaks, seeds))
    good = sum(lp <= 2 and gp > 8 for lp, gp in peaks)
    assert good >= 95, f"peaks in planted regimes on only {good}/100 seeds"
