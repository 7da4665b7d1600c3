import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentforge.distributions import (
    DiscreteDistribution,
    Grid,
    MomentVector,
    cheb_moments,
    moment_error_gamma,
    w1_distance,
)
from momentforge.recovery import (
    RecoveryConfig,
    _DctBasis,
    _DenseBasis,
    default_grid_size,
    dense_moment_rows,
    lp_grid_size,
    recover_distribution,
    simplex_project,
    solve_moment_lp,
    solve_weighted_qp,
)


def brute_force_simplex_projection(v):
    """Enumerate every support pattern and keep the feasible nearest point."""
    v = np.asarray(v, dtype=float)
    best = None
    best_dist = np.inf
    for size in range(1, v.size + 1):
        for subset in itertools.combinations(range(v.size), size):
            z = np.zeros_like(v)
            sel = np.asarray(subset)
            z[sel] = v[sel] - (v[sel].sum() - 1.0) / size
            if z[sel].min() < -1e-12:
                continue
            dist = np.linalg.norm(np.maximum(z, 0.0) - v)
            if dist < best_dist:
                best_dist = dist
                best = np.maximum(z, 0.0)
    return best


def random_distribution(rng, points):
    support = rng.uniform(-1, 1, points)
    weights = rng.dirichlet(np.ones(points))
    return DiscreteDistribution(support, weights)


class TestSimplexProjection:
    def test_symmetric_pair(self):
        assert simplex_project([0.6, 0.6]) == pytest.approx([0.5, 0.5])

    def test_kkt_by_inspection(self):
        assert simplex_project([2.0, 0.0]) == pytest.approx([1.0, 0.0])

    def test_already_feasible(self):
        z = np.array([0.2, 0.3, 0.5])
        assert simplex_project(z) == pytest.approx(z)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            simplex_project([])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5))
    def test_matches_active_set_enumeration(self, seed, dim):
        v = np.random.default_rng(seed).normal(0, 2, dim)
        got = simplex_project(v)
        want = brute_force_simplex_projection(v)
        assert got == pytest.approx(want, abs=1e-9)
        assert got.min() >= 0
        assert got.sum() == pytest.approx(1.0, abs=1e-12)


class TestBases:
    @pytest.mark.parametrize("g,k", [(64, 12), (129, 40), (200, 199)])
    def test_dct_matches_dense(self, g, k):
        grid = Grid.chebyshev(g)
        dense = _DenseBasis(dense_moment_rows(grid, k))
        fast = _DctBasis(g, k)
        rng = np.random.default_rng(3)
        z = rng.dirichlet(np.ones(g))
        v = rng.normal(size=k)
        assert fast.apply(z) == pytest.approx(dense.apply(z), abs=1e-10)
        assert fast.apply_adjoint(v) == pytest.approx(dense.apply_adjoint(v), abs=1e-10)


class TestWeightedQp:
    def test_point_mass_at_grid_node(self):
        cfg = RecoveryConfig(k=4, tolerance=1e-14)
        node_index = 2
        node = cfg.grid.points[node_index]
        moments = cheb_moments(DiscreteDistribution.point_mass(node), 4)
        solution = solve_weighted_qp(moments, cfg)
        assert solution.objective <= 1e-12
        assert solution.weights[node_index] >= 1 - 1e-6

    def test_zero_moments_single_node(self):
        cfg = RecoveryConfig(k=1)
        moments = MomentVector(np.zeros(1))
        solution = solve_weighted_qp(moments, cfg)
        assert solution.objective <= 1e-12

    def test_zero_moments_symmetric_grid(self):
        cfg = RecoveryConfig(k=1, g=8)
        solution = solve_weighted_qp(MomentVector(np.zeros(1)), cfg)
        assert solution.objective <= 1e-12

    def test_exact_moments_of_grid_supported(self):
        rng = np.random.default_rng(11)
        cfg = RecoveryConfig(k=8, tolerance=1e-13)
        picks = rng.choice(cfg.g, size=3, replace=False)
        weights = rng.dirichlet(np.ones(3))
        p = DiscreteDistribution(cfg.grid.points[picks], weights)
        solution = solve_weighted_qp(cheb_moments(p, 8), cfg)
        assert solution.objective <= 1e-10

    def test_trace_monotone(self):
        rng = np.random.default_rng(5)
        moments = cheb_moments(random_distribution(rng, 5), 12)
        noisy = MomentVector(moments.values + rng.normal(0, 0.02, 12))
        cfg = RecoveryConfig(k=12, keep_trace=True)
        solution = solve_weighted_qp(noisy, cfg)
        assert solution.trace is not None
        assert np.all(np.diff(solution.trace) <= 1e-15)


class TestRecoverDistribution:
    def test_mass_lands_near_top_node(self):
        result = recover_distribution(MomentVector(np.array([1.0])), cfg=RecoveryConfig(k=1, g=8))
        top = result.distribution.support[np.argmax(result.distribution.weights)]
        assert top == pytest.approx(math.cos(math.pi / 16))
        assert result.distribution.weights.max() >= 1 - 1e-6

    def test_three_point_distribution_bound(self):
        # proven chain: 36/k plus the sqrt(2 pi k)/g node-rounding term
        rng = np.random.default_rng(2)
        p = random_distribution(rng, 3)
        k = 16
        result = recover_distribution(cheb_moments(p, k))
        bound = (36 + math.sqrt(2 * math.pi)) / k + 1e-6
        assert w1_distance(p, result.distribution) <= bound

    @pytest.mark.parametrize("k", [8, 16])
    def test_exact_recovery_rate(self, k):
        rng = np.random.default_rng(100 + k)
        for _ in range(5):
            p = random_distribution(rng, 5)
            result = recover_distribution(cheb_moments(p, k))
            assert w1_distance(p, result.distribution) <= 40.0 / k

    def test_posterior_gamma_triangle_chain(self):
        rng = np.random.default_rng(9)
        p = random_distribution(rng, 5)
        k = 12
        exact = cheb_moments(p, k)
        noisy = MomentVector(exact.values + rng.normal(0, 0.01, k))
        result = recover_distribution(noisy)
        input_error = moment_error_gamma(noisy, exact).gamma
        achieved = cheb_moments(result.distribution, k)
        output_error = moment_error_gamma(achieved, exact).gamma
        assert output_error <= 2 * input_error + 1e-6

    def test_noisy_moment_rate(self):
        rng = np.random.default_rng(21)
        k = 16
        for _ in range(5):
            p = random_distribution(rng, 4)
            exact = cheb_moments(p, k)
            scale = rng.uniform(0.005, 0.05)
            j = np.arange(1, k + 1)
            noise = rng.normal(0, scale, k) * np.sqrt(j)
            noisy = MomentVector(exact.values + noise)
            gamma = moment_error_gamma(noisy, exact).gamma
            result = recover_distribution(noisy)
            assert w1_distance(p, result.distribution) <= 40.0 * (1.0 / k + gamma)

    def test_report_fields(self):
        p = DiscreteDistribution.point_mass(0.2)
        result = recover_distribution(cheb_moments(p, 8))
        assert result.k == 8
        assert result.g == default_grid_size(8)
        assert result.w1_bound == pytest.approx(36.0 / 8 + result.gamma)
        assert result.converged


class TestMomentLp:
    def test_huge_tolerance_accepts_uniform(self):
        moments = MomentVector(np.array([0.3, -0.1]))
        solution = solve_moment_lp(moments, np.full(2, 1e6))
        assert solution.feasible
        assert solution.iterations == 0
        assert solution.weights == pytest.approx(np.full(solution.weights.size, 1 / solution.weights.size))

    def test_grid_supported_target(self):
        cfg = RecoveryConfig(k=6, g=lp_grid_size(6))
        rng = np.random.default_rng(4)
        picks = rng.choice(cfg.g, size=4, replace=False)
        p = DiscreteDistribution(cfg.grid.points[picks], rng.dirichlet(np.ones(4)))
        moments = cheb_moments(p, 6)
        solution = solve_moment_lp(moments, np.full(6, 1e-6), cfg)
        assert solution.feasible
        assert solution.max_violation <= 1e-9

    def test_infeasible_flagged(self):
        # no distribution has first moment 1 and second moment -1
        moments = MomentVector(np.array([1.0, -1.0]))
        cfg = RecoveryConfig(k=2, g=8, max_iters=400)
        solution = solve_moment_lp(moments, np.full(2, 1e-4), cfg)
        assert not solution.feasible
        assert solution.max_violation > 1e-9

    def test_rejects_nonpositive_tolerance(self):
        with pytest.raises(ValueError):
            solve_moment_lp(MomentVector(np.array([0.0])), np.array([0.0]))


class TestConfig:
    def test_default_grid_size(self):
        cfg = RecoveryConfig(k=16)
        assert cfg.g == math.ceil(16**1.5)
        assert cfg.max_iters == 200 * cfg.g

    def test_grid_must_cover_degree(self):
        with pytest.raises(ValueError):
            RecoveryConfig(k=8, g=4)

    def test_lp_grid_size_formula(self):
        assert lp_grid_size(16) == math.ceil(16**1.5 * math.sqrt(1 + math.log(16)))
