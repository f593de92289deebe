#!/usr/bin/env python3
"""
Asymmetric phase-covariant cloning machine.

The three-qubit circuit takes |psi> (q0) and two blank qubits (q1, q2)
and produces two approximate copies: q0 is the A-clone forwarded to Bob,
q1 the B-clone kept by Eve, q2 an ancilla Eve discards. For the angle
choice (pi/4, theta, theta) the shrinking factors are sin(2 theta) for
Bob and cos(2 theta) for Eve.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from statevector import (
    HADAMARD, PAULI_Z, PHASE_S, PHASE_SDG,
    Circuit, CircuitOp, DensityMatrix2, Statevector,
    cnot_op, fidelity_pure, gate_op, reduced_density, rotation_op, run_circuit,
)
from utils.errors import DomainError

QUARTER_PI = np.pi / 4
ZERO_CONDITION_TOLERANCE = 1e-8

BOB_QUBIT = 0
EVE_QUBIT = 1
ANCILLA_QUBIT = 2

# Fixed label order; stream derivation and CSV output both rely on it
STATE_LABELS = ("plus", "minus", "plus_i", "minus_i")
STATE_BASIS = {"plus": "X", "minus": "X", "plus_i": "Y", "minus_i": "Y"}
STATE_SIGN = {"plus": 1, "minus": -1, "plus_i": 1, "minus_i": -1}

_KET0 = np.array([1, 0], dtype=complex)


@dataclass(frozen=True)
class CloneAngles:
    """Rotation half-angles of the three R_y gates (gates rotate by 2*theta_i)"""
    theta1: float
    theta2: float
    theta3: float

    @classmethod
    def from_theta(cls, theta: float) -> "CloneAngles":
        """(pi/4, theta, theta) on the closed interval [0, pi/4]"""
        if not 0.0 <= theta <= QUARTER_PI:
            raise DomainError(f"cloning angle must lie in [0, pi/4], got {theta}")
        return cls(QUARTER_PI, theta, theta)

    @property
    def zero_residual(self) -> float:
        c1, c2, c3 = np.cos([self.theta1, self.theta2, self.theta3])
        s1, s2, s3 = np.sin([self.theta1, self.theta2, self.theta3])
        return float(c1 * c2 * s3 - s1 * s2 * c3)


@dataclass(frozen=True)
class CloneCoefficients:
    """Amplitudes of the asymmetric cloner: mu (both correct), nu, xi"""
    mu: float
    nu: float
    xi: float

    @property
    def norm_squared(self) -> float:
        return self.mu ** 2 + self.nu ** 2 + self.xi ** 2


@dataclass(frozen=True)
class ShrinkingFactors:
    eta_A: float
    eta_B: float

    @property
    def fidelities(self) -> Tuple[float, float]:
        return (1 + self.eta_A) / 2, (1 + self.eta_B) / 2


def _check_open_range(theta: float):
    if not 0.0 < theta < QUARTER_PI:
        raise DomainError(f"cloning angle must lie in the open interval (0, pi/4), got {theta}")


def _check_closed_range(theta: float):
    if not 0.0 <= theta <= QUARTER_PI:
        raise DomainError(f"cloning angle must lie in [0, pi/4], got {theta}")


def optimal_angles(theta: float) -> CloneAngles:
    """Angle triple (pi/4, theta, theta) of the optimal phase-covariant cloner"""
    _check_open_range(theta)
    return CloneAngles(QUARTER_PI, theta, theta)


def universal_angles() -> CloneAngles:
    """Angles turning the same circuit into the symmetric universal (5/6) cloner"""
    return CloneAngles(
        np.arccos(1 / np.sqrt(5)) / 2,
        np.arccos(np.sqrt(5) / 3) / 2,
        np.arccos(2 / np.sqrt(5)) / 2,
    )


def coefficients(angles: CloneAngles) -> CloneCoefficients:
    """Read the cloner amplitudes off the circuit angles"""
    residual = angles.zero_residual
    if abs(residual) > ZERO_CONDITION_TOLERANCE:
        raise DomainError(
            f"angles violate the zero condition (residual {residual:.3e}); the circuit is not a cloner of the required form"
        )
    c1, c2, c3 = np.cos([angles.theta1, angles.theta2, angles.theta3])
    s1, s2, s3 = np.sin([angles.theta1, angles.theta2, angles.theta3])
    return CloneCoefficients(
        mu=float(c1 * c2 * c3 + s1 * s2 * s3),
        nu=float(c1 * s2 * c3 + s1 * c2 * s3),
        xi=float(s1 * c2 * c3 - c1 * s2 * s3),
    )


def shrinking_factors(theta: float) -> ShrinkingFactors:
    _check_closed_range(theta)
    return ShrinkingFactors(float(np.sin(2 * theta)), float(np.cos(2 * theta)))


def shrinking_factors_from_angles(angles: CloneAngles) -> ShrinkingFactors:
    """eta_A = sin(2 theta2), eta_B = sin(2 theta1) cos(2 theta2) for any valid triple"""
    coefficients(angles)  # validates the zero condition
    return ShrinkingFactors(
        float(np.sin(2 * angles.theta2)),
        float(np.sin(2 * angles.theta1) * np.cos(2 * angles.theta2)),
    )


def theoretical_fidelities(theta: float) -> Tuple[float, float]:
    """(F_A, F_B) = ((1 + sin 2theta)/2, (1 + cos 2theta)/2)"""
    return shrinking_factors(theta).fidelities


def clone_coefficients_fidelities(coeffs: CloneCoefficients) -> Tuple[float, float]:
    """Equatorial clone fidelities for an arbitrary coefficient triple"""
    return (1 + 2 * coeffs.mu * coeffs.nu) / 2, (1 + 2 * coeffs.mu * coeffs.xi) / 2


def build_circuit(angles: CloneAngles) -> Circuit:
    """Cloning circuit on (input, clone, ancilla), read column by column"""
    return Circuit(3, (
        rotation_op(2 * angles.theta1, EVE_QUBIT),
        cnot_op(EVE_QUBIT, ANCILLA_QUBIT),
        rotation_op(2 * angles.theta2, ANCILLA_QUBIT),
        cnot_op(ANCILLA_QUBIT, EVE_QUBIT),
        rotation_op(2 * angles.theta3, EVE_QUBIT),
        cnot_op(BOB_QUBIT, EVE_QUBIT),
        cnot_op(BOB_QUBIT, ANCILLA_QUBIT),
        cnot_op(EVE_QUBIT, BOB_QUBIT),
        cnot_op(ANCILLA_QUBIT, BOB_QUBIT),
    ))


def equatorial_state(phi: float) -> np.ndarray:
    return np.array([1, np.exp(1j * phi)], dtype=complex) / np.sqrt(2)


def bb84_state(label: str) -> np.ndarray:
    """Ket of one of the four equatorial BB84 states"""
    if label not in STATE_SIGN:
        raise DomainError(f"unknown BB84 state '{label}' (expected one of {', '.join(STATE_LABELS)})")
    phase = 1 if STATE_BASIS[label] == "X" else 1j
    return np.array([1, STATE_SIGN[label] * phase], dtype=complex) / np.sqrt(2)


def prepare_ops(label: str, target: int = 0) -> List[CircuitOp]:
    """Gate sequence taking |0> to the BB84 state on ``target``"""
    ops = [gate_op(HADAMARD, target, "H")]
    if label == "minus":
        ops.append(gate_op(PAULI_Z, target, "Z"))
    elif label == "plus_i":
        ops.append(gate_op(PHASE_S, target, "S"))
    elif label == "minus_i":
        ops.append(gate_op(PHASE_SDG, target, "SDG"))
    elif label != "plus":
        raise DomainError(f"unknown BB84 state '{label}'")
    return ops


def basis_change_ops(basis: str, target: int) -> List[CircuitOp]:
    """Rotate the X or Y basis onto the computational basis (plus-state -> outcome 0)"""
    if basis == "X":
        return [gate_op(HADAMARD, target, "H")]
    if basis == "Y":
        return [gate_op(PHASE_SDG, target, "SDG"), gate_op(HADAMARD, target, "H")]
    raise DomainError(f"unknown measurement basis '{basis}'")


def clone_state(psi: Sequence[complex], angles: CloneAngles) -> Tuple[DensityMatrix2, DensityMatrix2]:
    """Exact (rho_A, rho_B) for an arbitrary single-qubit input"""
    register = Statevector.product(psi, _KET0, _KET0)
    output = run_circuit(register, build_circuit(angles))
    return reduced_density(output, BOB_QUBIT), reduced_density(output, EVE_QUBIT)


def clone(phi: float, theta: float) -> Tuple[DensityMatrix2, DensityMatrix2]:
    """Clone the equatorial qubit (|0> + e^{i phi}|1>)/sqrt(2) at cloning angle theta"""
    if not 0.0 <= phi < 2 * np.pi:
        raise DomainError(f"phase must lie in [0, 2pi), got {phi}")
    return clone_state(equatorial_state(phi), optimal_angles(theta))


def clone_fidelities(phi: float, theta: float) -> Tuple[float, float]:
    rho_a, rho_b = clone(phi, theta)
    psi = equatorial_state(phi)
    return fidelity_pure(rho_a, psi), fidelity_pure(rho_b, psi)


def analytic_clone_density(coeffs: CloneCoefficients, psi: Sequence[complex], which: str = "A") -> DensityMatrix2:
    """Closed-form clone density of the asymmetric machine for any input ket"""
    psi = np.asarray(psi, dtype=complex)
    mu, nu, xi = coeffs.mu, coeffs.nu, coeffs.xi
    if which == "A":
        eta, floor, other = 2 * mu * nu, xi ** 2, nu
    elif which == "B":
        eta, floor, other = 2 * mu * xi, nu ** 2, xi
    else:
        raise DomainError(f"which must be 'A' or 'B', got {which!r}")
    populations = np.diag(np.abs(psi) ** 2)
    matrix = (
        eta * np.outer(psi, psi.conj())
        + floor * np.eye(2)
        + (mu ** 2 + other ** 2 - floor - eta) * populations
    )
    return DensityMatrix2(matrix)
