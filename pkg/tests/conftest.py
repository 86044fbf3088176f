import time

import numpy as np
import pytest

from wlr.harness import ExperimentConfig, SimulatedObserver, run_experiment

N_SEEDS = 20


class TimedRuns(list):
    """Experiment results plus the wall time taken to produce them."""

    elapsed_s: float = float("nan")


def _run_all(**cfg):
    t0 = time.perf_counter()
    runs = TimedRuns(
        run_experiment(SimulatedObserver(8.0, 2.0, seed=s), ExperimentConfig(seed=s, **cfg)) for s in range(N_SEEDS)
    )
    runs.elapsed_s = time.perf_counter() - t0
    return runs


@pytest.fixture(scope="session")
def circular_runs():
    """Twenty seeded experiments on the a=8, s=2 circular observer at +/-15 mm."""
    return _run_all()


@pytest.fixture(scope="session")
def circular_lapse_runs():
    """Same experiments with the first (r = 0.9 limit) response forced wrong."""
    return _run_all(forced_lapses=(0,))


def median_radius(runs):
    return float(np.median([r.contour.mean_radius_mm for r in runs]))
