#!/usr/bin/env python3
"""
Unit tests for stats.py
Tests quadratic fits, curve intersection and the resampling intervals
"""

import pytest
import sys
import os

import numpy as np

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from bb84 import binary_entropy
from experiment import ExperimentRecord, SweepConfig, group_by_state, run_sweep
from noise import NoiseModel
from stats import (
    QuadraticFit,
    aggregate_cumulative, analyze, bootstrap_ci, excess_over_theory, fit_quadratic,
    fitted_curve_samples, information_estimate, intersect, monte_carlo_ci, summarize_replicates,
)
from utils.errors import AnalysisError, DomainError, NoCrossoverError, RankDeficientError

QUARTER_PI = np.pi / 4
CROSSOVER_QBER = 0.5 - np.sqrt(2) / 4


def theory_a(theta):
    return (1 + np.sin(2 * theta)) / 2


def theory_b(theta):
    return (1 + np.cos(2 * theta)) / 2


def synthetic_records(rng, n=100, sigma=0.03):
    theta = rng.uniform(0, QUARTER_PI, n)
    fid_a = theory_a(theta) + rng.normal(0, sigma, n)
    fid_b = theory_b(theta) + rng.normal(0, sigma, n)
    return np.column_stack([theta, fid_a, fid_b])


def make_fit(coeffs, n=10):
    return QuadraticFit(tuple(coeffs), np.zeros((3, 3)), n, 0.0)


@pytest.fixture
def dense_theory_fits():
    theta = np.linspace(0, QUARTER_PI, 201)
    return (
        fit_quadratic(np.column_stack([theta, theory_a(theta)])),
        fit_quadratic(np.column_stack([theta, theory_b(theta)])),
    )


class TestFitQuadratic:
    """Ordinary least squares with covariance"""

    def test_exact_linear_data(self):
        theta = np.linspace(0, 0.7, 12)
        fit = fit_quadratic(np.column_stack([theta, 0.5 + 0.2 * theta]))
        assert np.allclose(fit.coeffs, (0.5, 0.2, 0.0), atol=1e-10)
        assert fit.rss < 1e-18

    def test_three_points_interpolate(self):
        points = [(0.1, 0.9), (0.4, 0.6), (0.7, 0.8)]
        fit = fit_quadratic(points)
        for theta, fid in points:
            assert abs(fit(theta) - fid) < 1e-10
        assert np.all(fit.cov == 0)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficientError):
            fit_quadratic([(0.2, 0.5), (0.2, 0.6), (0.4, 0.7), (0.4, 0.8)])
        with pytest.raises(RankDeficientError):
            fit_quadratic([(0.1, 0.5), (0.2, 0.6)])

    def test_covariance_symmetric_psd(self):
        data = synthetic_records(np.random.default_rng(1))
        fit = fit_quadratic(data[:, :2])
        assert np.allclose(fit.cov, fit.cov.T, atol=1e-15)
        assert np.min(np.linalg.eigvalsh(fit.cov)) >= -1e-10

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            n = rng.integers(5, 60)
            theta = rng.uniform(0, QUARTER_PI, n)
            fid = rng.uniform(0, 1, n)
            X = np.vander(theta, 3, increasing=True)
            oracle = np.linalg.solve(X.T @ X, X.T @ fid)
            fit = fit_quadratic(np.column_stack([theta, fid]))
            assert np.allclose(fit.coeffs, oracle, rtol=1e-8, atol=1e-10)
            rss = float(np.sum((fid - X @ oracle) ** 2))
            assert np.allclose(fit.cov, rss / (n - 3) * np.linalg.inv(X.T @ X), rtol=1e-8, atol=1e-14)

    def test_noisy_theory_within_standard_errors(self):
        rng = np.random.default_rng(3)
        data = synthetic_records(rng)
        fit = fit_quadratic(data[:, :2])
        # best quadratic approximation of the noiseless curve on the same design
        X = np.vander(data[:, 0], 3, increasing=True)
        best = np.linalg.solve(X.T @ X, X.T @ theory_a(data[:, 0]))
        assert np.all(np.abs(np.array(fit.coeffs) - best) < 5 * fit.std_errors)


class TestIntersect:
    """Crossing of two fitted quadratics"""

    def test_theory_crossover(self, dense_theory_fits):
        estimate = intersect(*dense_theory_fits)
        assert estimate.theta_star == pytest.approx(np.pi / 8, abs=1e-3)
        assert estimate.qber_star == pytest.approx(CROSSOVER_QBER, abs=1e-3)
        assert estimate.qber_star == 1.0 - estimate.fid_star

    def test_identical_curves(self):
        fit = make_fit((0.5, 0.2, -0.1))
        with pytest.raises(NoCrossoverError):
            intersect(fit, fit)

    def test_recovers_planted_root(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            root = rng.uniform(0.05, QUARTER_PI - 0.05)
            slope = rng.uniform(0.5, 2.0)
            curvature = rng.uniform(-0.3, 0.3)
            # difference d(theta) = slope*(theta - root) + curvature*(theta - root)^2
            d2 = curvature
            d1 = slope - 2 * curvature * root
            d0 = -slope * root + curvature * root ** 2
            base = np.array([0.5, 0.1, -0.2])
            estimate = intersect(make_fit(base + [d0, d1, d2]), make_fit(base))
            assert estimate.theta_star == pytest.approx(root, abs=1e-12)

    def test_linear_difference(self):
        estimate = intersect(make_fit((0.3, 1.0, 0.0)), make_fit((0.5, 0.0, 0.0)))
        assert estimate.theta_star == pytest.approx(0.2)
        assert estimate.fid_star == pytest.approx(0.5)

    def test_wrong_direction_rejected(self):
        # A - B falls through zero, i.e. Bob's advantage turning into Eve's
        with pytest.raises(NoCrossoverError):
            intersect(make_fit((0.5, 0.0, 0.0)), make_fit((0.3, 1.0, 0.0)))

    def test_no_root_in_domain(self):
        with pytest.raises(NoCrossoverError):
            intersect(make_fit((0.9, 0.0, 0.0)), make_fit((0.5, 0.0, 0.0)))

    def test_falling_root_skipped(self):
        # d(theta) = (theta - 0.2)(theta - 0.6) falls through 0.2 and rises through 0.6
        estimate = intersect(make_fit((0.12, -0.8, 1.0)), make_fit((0.0, 0.0, 0.0)))
        assert estimate.theta_star == pytest.approx(0.6)


class TestSummaries:
    """Percentile intervals and failure accounting"""

    def test_arithmetic_sequence(self):
        values = np.arange(1000, dtype=float)
        interval = summarize_replicates(values)
        assert interval.lo == pytest.approx(24.975)
        assert interval.hi == pytest.approx(974.025)
        assert interval.mean == pytest.approx(499.5)
        assert interval.n_failures == 0

    def test_constant_replicates(self):
        interval = summarize_replicates(np.full(500, 0.3))
        assert interval.lo == interval.mean == interval.hi == 0.3

    def test_failures_counted(self):
        values = np.array([0.1, np.nan, 0.2, 0.3])
        interval = summarize_replicates(values)
        assert interval.n_failures == 1
        assert interval.n_reps == 4

    def test_too_many_failures(self):
        with pytest.raises(AnalysisError):
            summarize_replicates(np.array([0.1, np.nan, np.nan]))


class TestMonteCarlo:
    """Coefficient-perturbation intervals"""

    def test_zero_covariance_is_degenerate(self):
        fit_a = make_fit((0.5, 1.0, 0.0))
        fit_b = make_fit((0.7, 0.0, 0.0))
        theta_ci, qber_ci = monte_carlo_ci(fit_a, fit_b, reps=200, seed=1)
        point = intersect(fit_a, fit_b)
        assert theta_ci.lo == theta_ci.mean == theta_ci.hi == point.theta_star
        assert qber_ci.mean == point.qber_star

    def test_theory_fits_contain_crossover(self, dense_theory_fits):
        theta_ci, _ = monte_carlo_ci(*dense_theory_fits, reps=500, seed=2)
        assert theta_ci.contains(np.pi / 8)

    def test_same_seed_same_interval(self, dense_theory_fits):
        a = monte_carlo_ci(*dense_theory_fits, reps=300, seed=3)
        b = monte_carlo_ci(*dense_theory_fits, reps=300, seed=3)
        assert a.theta == b.theta and a.qber == b.qber

    def test_schedule_independent(self, dense_theory_fits):
        a = monte_carlo_ci(*dense_theory_fits, reps=300, seed=3)
        b = monte_carlo_ci(*dense_theory_fits, reps=300, seed=3, workers=2)
        assert np.array_equal(a.theta_replicates, b.theta_replicates)

    def test_minimum_reps(self, dense_theory_fits):
        with pytest.raises(DomainError):
            monte_carlo_ci(*dense_theory_fits, reps=99)


class TestBootstrap:
    """Record-resampling intervals"""

    def test_identical_theta_is_rank_deficient(self):
        records = [(0.3, 0.8, 0.6)] * 10
        with pytest.raises(RankDeficientError):
            bootstrap_ci(records, reps=100)

    def test_needs_four_records(self):
        with pytest.raises(DomainError):
            bootstrap_ci([(0.1, 0.5, 0.5), (0.2, 0.5, 0.5), (0.3, 0.5, 0.5)], reps=100)

    def test_same_seed_same_interval(self):
        data = synthetic_records(np.random.default_rng(5))
        a = bootstrap_ci(data, reps=200, seed=9)
        b = bootstrap_ci(data, reps=200, seed=9)
        assert a.theta == b.theta and a.qber == b.qber

    def test_accepts_records(self):
        data = synthetic_records(np.random.default_rng(6), n=30)
        records = [ExperimentRecord("plus", t, 100, a, b) for t, a, b in data]
        assert bootstrap_ci(records, reps=100, seed=1).theta == bootstrap_ci(data, reps=100, seed=1).theta

    def test_unpaired_differs(self):
        data = synthetic_records(np.random.default_rng(7))
        paired = bootstrap_ci(data, reps=200, seed=4)
        unpaired = bootstrap_ci(data, reps=200, seed=4, paired=False)
        assert not np.array_equal(paired.theta_replicates, unpaired.theta_replicates)

    def test_agrees_with_monte_carlo(self):
        for seed in range(5):
            data = synthetic_records(np.random.default_rng(100 + seed))
            fit_a = fit_quadratic(data[:, [0, 1]])
            fit_b = fit_quadratic(data[:, [0, 2]])
            mc_theta, _ = monte_carlo_ci(fit_a, fit_b, reps=500, seed=seed)
            boot_theta, _ = bootstrap_ci(data, reps=500, seed=seed)
            wider = max(mc_theta.half_width, boot_theta.half_width)
            assert abs(mc_theta.mean - boot_theta.mean) < wider

    @pytest.mark.slow
    def test_coverage_and_agreement(self):
        covered = 0
        for seed in range(100):
            data = synthetic_records(np.random.default_rng(1000 + seed))
            theta_ci, _ = bootstrap_ci(data, reps=400, seed=seed)
            covered += theta_ci.contains(np.pi / 8)

            fit_a = fit_quadratic(data[:, [0, 1]])
            fit_b = fit_quadratic(data[:, [0, 2]])
            mc_theta, _ = monte_carlo_ci(fit_a, fit_b, reps=400, seed=seed)
            assert abs(mc_theta.mean - theta_ci.mean) < max(mc_theta.half_width, theta_ci.half_width)
        assert covered >= 88


class TestCumulative:
    """Cross-state aggregation"""

    def test_published_means(self):
        means = (0.24318, 0.26747, 0.18430, 0.17789)
        interval = aggregate_cumulative([np.full(1000, m) for m in means])
        assert interval.mean == pytest.approx(0.21821, abs=1e-5)

    def test_identical_arrays(self):
        a = np.random.default_rng(8).normal(0.2, 0.01, 1000)
        combined = aggregate_cumulative([a, a, a, a])
        single = summarize_replicates(a)
        assert combined.mean == pytest.approx(single.mean, abs=1e-12)
        assert combined.lo == pytest.approx(single.lo, abs=1e-12)
        assert combined.hi == pytest.approx(single.hi, abs=1e-12)

    def test_permutation_symmetric(self):
        rng = np.random.default_rng(9)
        arrays = [rng.normal(0.2, 0.01, 500) for _ in range(4)]
        forward = aggregate_cumulative(arrays)
        backward = aggregate_cumulative(arrays[::-1])
        assert forward.mean == pytest.approx(backward.mean, abs=1e-12)
        assert forward.lo == pytest.approx(backward.lo, abs=1e-12)

    def test_mismatched_lengths(self):
        with pytest.raises(DomainError):
            aggregate_cumulative([np.zeros(3), np.zeros(4)])

    def test_nan_rows_count_as_failures(self):
        a = np.array([0.2, np.nan, 0.2, 0.2])
        interval = aggregate_cumulative([a, np.full(4, 0.2)])
        assert interval.n_failures == 1

    def test_information_estimate(self):
        interval = information_estimate(np.full(100, 0.21821))
        assert interval.mean == pytest.approx(0.24311, abs=1e-4)

    def test_information_estimate_counts_failures(self):
        interval = information_estimate(np.array([0.2, np.nan, 0.2, 0.2]))
        assert interval.n_failures == 1
        assert interval.n_reps == 4
        assert interval.mean == pytest.approx(1.0 - binary_entropy(0.2))

    def test_cumulative_failures_match_across_blocks(self):
        rng = np.random.default_rng(12)
        grouped = {
            label: [ExperimentRecord(label, t, 100, a, b) for t, a, b in synthetic_records(rng, n=40, sigma=0.05)]
            for label in ("plus", "minus")
        }
        report, _, _ = analyze(grouped, reps=300, seed=4)
        cumulative = report["cumulative"]
        assert cumulative["eve_information"]["n_failures"] == cumulative["qber_star"]["n_failures"]
        assert cumulative["eve_information"]["n_reps"] == cumulative["qber_star"]["n_reps"]

    def test_excess_over_theory(self):
        assert excess_over_theory(0.21821) == pytest.approx(0.21821 - CROSSOVER_QBER)


class TestAnalyze:
    """End-to-end analysis of grouped records"""

    def test_per_state_failure_isolated(self):
        rng = np.random.default_rng(10)
        good = [ExperimentRecord("plus", t, 100, a, b) for t, a, b in synthetic_records(rng)]
        bad = [ExperimentRecord("minus", 0.3, 100, 0.8, 0.6)] * 10
        report, analyses, result = analyze({"plus": good, "minus": bad}, reps=200, seed=1)
        assert list(analyses) == ["plus"]
        assert not result.is_valid
        assert report["errors"][0]["state"] == "minus"
        assert report["cumulative"]["states"] == ["plus"]
        assert report["warnings"]

    def test_report_schema(self):
        rng = np.random.default_rng(11)
        grouped = {
            label: [ExperimentRecord(label, t, 100, a, b) for t, a, b in synthetic_records(rng, n=40)]
            for label in ("plus", "minus", "plus_i", "minus_i")
        }
        report, _, result = analyze(grouped, reps=150, seed=2)
        assert result.is_valid
        block = report["states"]["plus"]
        assert {"fit_a", "fit_b", "point", "monte_carlo", "bootstrap"} <= set(block)
        assert "n_failures" in block["bootstrap"]["theta_star"]
        assert report["cumulative"]["qber_star"]["mean"] == pytest.approx(CROSSOVER_QBER, abs=0.03)

    @pytest.mark.slow
    def test_gate_noise_raises_crossover_error_rate(self):
        cfg = SweepConfig(n_angles=40, shots=400, noise=NoiseModel.default(), seed=21)
        report, _, result = analyze(group_by_state(run_sweep(cfg)), reps=200, seed=21)
        assert result.is_valid
        assert 0.15 <= report["cumulative"]["qber_star"]["mean"] <= 0.30
        assert report["cumulative"]["excess_over_theory"] > 0

    def test_fitted_curve_samples(self, dense_theory_fits):
        rows = fitted_curve_samples({"plus": dense_theory_fits}, points=11)
        assert len(rows) == 11
        assert rows[0][:2] == ("plus", 0.0)
        assert rows[-1][1] == pytest.approx(QUARTER_PI)
