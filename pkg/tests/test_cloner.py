#!/usr/bin/env python3
"""
Unit tests for cloner.py
Tests the cloning circuit against its closed-form amplitudes, fidelities
and the BB84 state preparation gates
"""

import pytest
import sys
import os

import numpy as np

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cloner import (
    QUARTER_PI, STATE_LABELS,
    CloneAngles, CloneCoefficients,
    analytic_clone_density, basis_change_ops, bb84_state, build_circuit, clone,
    clone_coefficients_fidelities, clone_fidelities, clone_state, coefficients,
    optimal_angles, prepare_ops, shrinking_factors, shrinking_factors_from_angles,
    theoretical_fidelities, universal_angles,
)
from statevector import Circuit, circuit_unitary, fidelity_pure, init, run_circuit
from utils.errors import DomainError


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _expected_outputs(t1, t2, t3):
    """Images of |000> and |100> written out coefficient by coefficient"""
    c1, c2, c3 = np.cos([t1, t2, t3])
    s1, s2, s3 = np.sin([t1, t2, t3])
    mu = c1 * c2 * c3 + s1 * s2 * s3
    zero = c1 * c2 * s3 - s1 * s2 * c3
    xi = s1 * c2 * c3 - c1 * s2 * s3
    nu = c1 * s2 * c3 + s1 * c2 * s3
    from_zero = np.zeros(8)
    from_zero[0b000], from_zero[0b110], from_zero[0b101], from_zero[0b011] = mu, zero, xi, nu
    from_one = np.zeros(8)
    from_one[0b111], from_one[0b001], from_one[0b010], from_one[0b100] = mu, zero, xi, nu
    return from_zero, from_one


class TestCircuitAmplitudes:
    """The circuit reproduces the closed-form output amplitudes"""

    def test_amplitudes_for_random_angles(self, rng):
        for _ in range(50):
            t1, t2, t3 = rng.uniform(0, np.pi, 3)
            unitary = circuit_unitary(build_circuit(CloneAngles(t1, t2, t3)))
            from_zero, from_one = _expected_outputs(t1, t2, t3)
            assert np.max(np.abs(unitary[:, 0b000] - from_zero)) < 1e-10
            assert np.max(np.abs(unitary[:, 0b100] - from_one)) < 1e-10

    def test_circuit_is_unitary(self):
        unitary = circuit_unitary(build_circuit(optimal_angles(0.3)))
        assert np.allclose(unitary.conj().T @ unitary, np.eye(8), atol=1e-12)

    def test_coefficients_of_optimal_angles(self):
        theta = 0.25
        coeffs = coefficients(optimal_angles(theta))
        assert coeffs.mu == pytest.approx(1 / np.sqrt(2), abs=1e-12)
        assert coeffs.nu == pytest.approx(np.sin(2 * theta) / np.sqrt(2), abs=1e-12)
        assert coeffs.xi == pytest.approx(np.cos(2 * theta) / np.sqrt(2), abs=1e-12)
        assert coeffs.norm_squared == pytest.approx(1.0, abs=1e-12)

    def test_zero_condition_violation_rejected(self):
        with pytest.raises(DomainError):
            coefficients(CloneAngles(0.3, 0.5, 0.1))


class TestAngles:
    """Angle-domain rules"""

    def test_optimal_angles_open_interval(self):
        assert optimal_angles(np.pi / 8) == CloneAngles(QUARTER_PI, np.pi / 8, np.pi / 8)
        for bad in (0.0, QUARTER_PI, -0.1, 1.0):
            with pytest.raises(DomainError):
                optimal_angles(bad)

    def test_from_theta_accepts_endpoints(self):
        assert CloneAngles.from_theta(0.0).theta2 == 0.0
        assert CloneAngles.from_theta(QUARTER_PI).theta3 == QUARTER_PI
        with pytest.raises(DomainError):
            CloneAngles.from_theta(QUARTER_PI + 1e-9)

    def test_zero_residual_vanishes_on_optimal_family(self, rng):
        for theta in rng.uniform(0.01, QUARTER_PI - 0.01, 20):
            assert abs(optimal_angles(theta).zero_residual) < 1e-15


class TestFidelities:
    """Shrinking factors, circle relation and phase covariance"""

    def test_theoretical_fidelities_at_crossover(self):
        f_a, f_b = theoretical_fidelities(np.pi / 8)
        assert f_a == pytest.approx(0.85355, abs=1e-5)
        assert f_b == pytest.approx(f_a, abs=1e-12)

    def test_shrinking_factor_endpoints(self):
        assert shrinking_factors(QUARTER_PI).eta_A == pytest.approx(1.0)
        assert shrinking_factors(0.0).eta_B == pytest.approx(1.0)
        with pytest.raises(DomainError):
            shrinking_factors(-0.01)

    def test_circle_relation(self, rng):
        for theta in rng.uniform(1e-6, QUARTER_PI - 1e-6, 1000):
            f_a, f_b = clone_fidelities(0.0, theta)
            assert (2 * f_a - 1) ** 2 + (2 * f_b - 1) ** 2 == pytest.approx(1.0, abs=1e-9)

    def test_simulated_fidelities_match_formula(self, rng):
        for theta in rng.uniform(0.01, QUARTER_PI - 0.01, 10):
            simulated = clone_fidelities(1.234, theta)
            assert simulated == pytest.approx(theoretical_fidelities(theta), abs=1e-10)

    def test_phase_covariance(self, rng):
        phis = np.arange(64) * 2 * np.pi / 64
        for theta in rng.uniform(0.01, QUARTER_PI - 0.01, 10):
            fids = np.array([clone_fidelities(phi, theta) for phi in phis])
            assert np.max(np.ptp(fids, axis=0)) < 1e-10

    def test_clone_phase_range(self):
        with pytest.raises(DomainError):
            clone(2 * np.pi, 0.3)
        rho_a, rho_b = clone(0.0, 0.3)
        assert rho_a.is_valid() and rho_b.is_valid()


class TestUniversalMachine:
    """The nu = xi member of the family"""

    def test_universal_coefficients(self):
        coeffs = coefficients(universal_angles())
        assert coeffs.mu == pytest.approx(np.sqrt(2 / 3), abs=1e-12)
        assert coeffs.nu == pytest.approx(1 / np.sqrt(6), abs=1e-12)
        assert coeffs.xi == pytest.approx(1 / np.sqrt(6), abs=1e-12)

    def test_five_sixths_fidelity(self):
        coeffs = CloneCoefficients(np.sqrt(2 / 3), 1 / np.sqrt(6), 1 / np.sqrt(6))
        f_a, f_b = clone_coefficients_fidelities(coeffs)
        assert f_a == pytest.approx(5 / 6, abs=1e-10)
        assert f_b == pytest.approx(5 / 6, abs=1e-10)

    def test_fidelity_independent_of_input(self, rng):
        angles = universal_angles()
        for _ in range(10):
            psi = rng.normal(size=2) + 1j * rng.normal(size=2)
            psi /= np.linalg.norm(psi)
            rho_a, rho_b = clone_state(psi, angles)
            assert fidelity_pure(rho_a, psi) == pytest.approx(5 / 6, abs=1e-10)
            assert fidelity_pure(rho_b, psi) == pytest.approx(5 / 6, abs=1e-10)

    def test_shrinking_factors_from_angles(self):
        factors = shrinking_factors_from_angles(universal_angles())
        assert factors.eta_A == pytest.approx(2 / 3, abs=1e-12)
        assert factors.eta_B == pytest.approx(2 / 3, abs=1e-12)
        assert factors.fidelities[0] == pytest.approx(5 / 6, abs=1e-12)


class TestAnalyticDensity:
    """Closed-form clone densities agree with simulation for any input"""

    @pytest.mark.parametrize("theta", [0.1, np.pi / 8, 0.7])
    def test_matches_simulation(self, rng, theta):
        angles = optimal_angles(theta)
        coeffs = coefficients(angles)
        for _ in range(5):
            psi = rng.normal(size=2) + 1j * rng.normal(size=2)
            psi /= np.linalg.norm(psi)
            rho_a, rho_b = clone_state(psi, angles)
            assert np.allclose(analytic_clone_density(coeffs, psi, "A").matrix, rho_a.matrix, atol=1e-10)
            assert np.allclose(analytic_clone_density(coeffs, psi, "B").matrix, rho_b.matrix, atol=1e-10)

    def test_unknown_clone_rejected(self):
        with pytest.raises(DomainError):
            analytic_clone_density(coefficients(optimal_angles(0.2)), [1, 0], "C")


class TestStatePreparation:
    """BB84 kets, preparation gates and basis changes"""

    @pytest.mark.parametrize("label", STATE_LABELS)
    def test_prepare_ops_match_kets(self, label):
        state = run_circuit(init(1), Circuit(1, tuple(prepare_ops(label, 0))))
        assert np.allclose(state.amps, bb84_state(label), atol=1e-12)

    @pytest.mark.parametrize("label,basis,outcome", [
        ("plus", "X", 0), ("minus", "X", 1), ("plus_i", "Y", 0), ("minus_i", "Y", 1),
    ])
    def test_basis_change_maps_state_to_outcome(self, label, basis, outcome):
        ops = tuple(prepare_ops(label, 0)) + tuple(basis_change_ops(basis, 0))
        probs = run_circuit(init(1), Circuit(1, ops)).probabilities()
        assert probs[outcome] == pytest.approx(1.0, abs=1e-12)

    def test_unknown_labels(self):
        with pytest.raises(DomainError):
            bb84_state("zero")
        with pytest.raises(DomainError):
            prepare_ops("zero")
        with pytest.raises(DomainError):
            basis_change_ops("Z", 0)
