"""Scaling-study harness for the private synthesis pipeline.

Synthetic generators sampled by inverse CDF on a fixed grid, a sweep of
dataset sizes over powers of two with repeated trials, and the CSV rows
(n, trial, w1, expected_bound) the study emits. Trials are independent
given their derived seeds, so they can run in parallel; output order is by
(n, trial) regardless of completion order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distributions import DiscreteDistribution, w1_distance
from .dpsynth import PrivacyBudget, dp_synthesize, expected_error_curve

GENERATOR_GRID_SIZE = 10_000


def generator_pdf(name, x):
    """Unnormalized densities of the built-in 1-D generators."""
    x = np.asarray(x, dtype=float)
    if name == "gaussian":
        return np.exp(-0.5 * x * x)
    if name == "sine":
        return np.sin(np.pi * x) + 1.0
    if name == "powerlaw":
        return (x + 1.1) ** -2.0
    raise ValueError(f"unknown generator {name!r}")


GENERATORS = ("gaussian", "sine", "powerlaw")


def sample_generator(name, n, seed):
    """n draws by inverse CDF over a 10^4-point grid on [-1, 1]."""
    grid = np.linspace(-1.0, 1.0, GENERATOR_GRID_SIZE)
    masses = generator_pdf(name, grid)
    cdf = np.cumsum(masses)
    cdf /= cdf[-1]
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="left")
    return grid[np.clip(idx, 0, grid.size - 1)]


def trial_seeds(base_seed, n, trial):
    """Independent (data seed, mechanism seed) derived from the run seed."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(int(n), int(trial)))
    data_seed, noise_seed = ss.generate_state(2)
    return int(data_seed), int(noise_seed)


@dataclass
class ScalingRow:
    n: int
    trial: int
    w1: float
    expected_bound: float


def _run_one(args):
    name, n, trial, epsilon, delta, base_seed = args
    data_seed, noise_seed = trial_seeds(base_seed, n, trial)
    data = sample_generator(name, n, data_seed)
    budget = PrivacyBudget(epsilon=epsilon, delta=delta)
    result = dp_synthesize(data, budget, noise_seed)
    sample_dist = DiscreteDistribution.uniform_over(data)
    w1 = w1_distance(sample_dist, result.distribution)
    return ScalingRow(
        n=n,
        trial=trial,
        w1=w1,
        expected_bound=expected_error_curve(n, epsilon, delta),
    )


def delta_for(n, rule="1/n^2"):
    if rule == "1/n^2":
        return 1.0 / (n * n)
    return float(rule)


def run_dp_scaling(name, n_values, trials, epsilon, seed, delta_rule="1/n^2", jobs=1):
    """All (n, trial) runs for one generator, ordered by (n, trial)."""
    tasks = [
        (name, int(n), trial, epsilon, delta_for(int(n), delta_rule), seed)
        for n in sorted(n_values)
        for trial in range(trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_one, tasks))
    else:
        rows = [_run_one(t) for t in tasks]
    rows.sort(key=lambda r: (r.n, r.trial))
    return rows


def loglog_slope(ns, means):
    """Least-squares slope of log(mean W1) against log n."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(means, dtype=float))
    x = x - x.mean()
    return float((x @ (y - y.mean())) / (x @ x))


def mean_w1_by_n(rows):
    """(sorted n values, mean W1 per n) from scaling rows."""
    ns = sorted({row.n for row in rows})
    means = [float(np.mean([row.w1 for row in rows if row.n == n])) for n in ns]
    return ns, means
