#!/usr/bin/env python3
"""
Dense pure-state simulator for registers of up to four qubits.

Qubit 0 is the most significant bit of the basis-state index, so the
amplitude of |q0 q1 q2> sits at index 4*q0 + 2*q1 + q2.

The array helpers (``apply_1q_array``, ``apply_cnot_array``) accept a
leading batch axis; the noise module uses them to push many trajectories
through a circuit at once.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from utils.errors import DomainError

MAX_QUBITS = 4
NORM_TOLERANCE = 1e-10
UNITARY_TOLERANCE = 1e-10

IDENTITY = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PHASE_S = np.array([[1, 0], [0, 1j]], dtype=complex)
PHASE_SDG = PHASE_S.conj().T
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


def ry(theta: float) -> np.ndarray:
    """R_y(theta) = [[cos(theta/2), -sin(theta/2)], [sin(theta/2), cos(theta/2)]]"""
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class Statevector:
    """Normalized amplitude vector over ``n_qubits`` qubits"""
    n_qubits: int
    amps: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if amps.shape != (2 ** self.n_qubits,):
            raise DomainError(
                f"expected {2 ** self.n_qubits} amplitudes for {self.n_qubits} qubits, got shape {amps.shape}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise DomainError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex]) -> "Statevector":
        amps = np.asarray(amps, dtype=complex)
        n = int(round(np.log2(len(amps)))) if len(amps) else 0
        _check_register_size(n)
        return cls(n, amps)

    @classmethod
    def product(cls, *qubits: Sequence[complex]) -> "Statevector":
        """Tensor product of single-qubit states, qubit 0 first"""
        amps = np.array([1.0], dtype=complex)
        for qubit in qubits:
            amps = np.kron(amps, np.asarray(qubit, dtype=complex))
        return cls.from_amplitudes(amps)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def probabilities(self) -> np.ndarray:
        probs = np.abs(self.amps) ** 2
        return probs / probs.sum()

    def allclose(self, other: "Statevector", atol: float = 1e-10) -> bool:
        return self.n_qubits == other.n_qubits and np.allclose(self.amps, other.amps, atol=atol)


@dataclass(frozen=True)
class DensityMatrix2:
    """Single-qubit density matrix"""
    matrix: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (2, 2):
            raise DomainError(f"expected a 2x2 matrix, got shape {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    def is_valid(self, tol: float = 1e-10) -> bool:
        m = self.matrix
        hermitian = np.allclose(m, m.conj().T, atol=tol)
        unit_trace = abs(np.trace(m) - 1.0) <= tol
        positive = bool(np.all(np.linalg.eigvalsh((m + m.conj().T) / 2) >= -tol))
        return hermitian and unit_trace and positive

    def bloch_vector(self) -> Tuple[float, float, float]:
        m = self.matrix
        return (
            float(2 * m[0, 1].real),
            float(-2 * m[0, 1].imag),
            float((m[0, 0] - m[1, 1]).real),
        )


@dataclass(frozen=True)
class CircuitOp:
    """One gate: a single-qubit matrix on ``targets[0]`` or a CNOT on (control, target)"""
    kind: str
    targets: Tuple[int, ...]
    matrix: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    label: str = ""

    @property
    def is_two_qubit(self) -> bool:
        return self.kind in ("cnot", "link")


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list acting on ``n_qubits`` qubits"""
    n_qubits: int
    ops: Tuple[CircuitOp, ...] = ()

    def then(self, *ops: CircuitOp) -> "Circuit":
        return Circuit(self.n_qubits, self.ops + tuple(ops))

    def __len__(self) -> int:
        return len(self.ops)


def rotation_op(theta: float, target: int) -> CircuitOp:
    return CircuitOp("gate", (target,), ry(theta), label=f"RY({theta:.6g})")


def gate_op(matrix: np.ndarray, target: int, label: str) -> CircuitOp:
    return CircuitOp("gate", (target,), np.asarray(matrix, dtype=complex), label=label)


def cnot_op(control: int, target: int) -> CircuitOp:
    if control == target:
        raise DomainError("CNOT control and target must differ")
    return CircuitOp("cnot", (control, target), label=f"CX({control},{target})")


def link_op(target: int) -> CircuitOp:
    """Identity marking a qubit's passage over the quantum link (noise-bearing)"""
    return CircuitOp("link", (target,), IDENTITY, label=f"LINK({target})")


def _check_register_size(n_qubits: int):
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise DomainError(f"n_qubits must lie in [1, {MAX_QUBITS}], got {n_qubits}")


def _check_index(index: int, n_qubits: int, what: str = "qubit"):
    if not 0 <= index < n_qubits:
        raise DomainError(f"{what} index {index} out of range for {n_qubits} qubits")


def _check_unitary(gate: np.ndarray):
    if gate.shape != (2, 2):
        raise DomainError(f"single-qubit gate must be 2x2, got shape {gate.shape}")
    if not np.allclose(gate.conj().T @ gate, IDENTITY, atol=UNITARY_TOLERANCE):
        raise DomainError("gate is not unitary within 1e-10")


def apply_1q_array(amps: np.ndarray, gate: np.ndarray, target: int, n_qubits: int) -> np.ndarray:
    """Apply a 2x2 matrix to ``target`` of amplitude arrays shaped (..., 2**n)"""
    batch = amps.shape[:-1]
    psi = amps.reshape(batch + (2,) * n_qubits)
    axis = len(batch) + target
    psi = np.moveaxis(psi, axis, -1) @ gate.T
    return np.moveaxis(psi, -1, axis).reshape(amps.shape)


def apply_cnot_array(amps: np.ndarray, control: int, target: int, n_qubits: int) -> np.ndarray:
    batch = amps.shape[:-1]
    psi = amps.reshape(batch + (2,) * n_qubits).copy()
    control_axis = len(batch) + control
    target_axis = len(batch) + target
    selector = [slice(None)] * psi.ndim
    selector[control_axis] = 1
    selector = tuple(selector)
    # indexing drops the control axis, shifting later axes left by one
    flip_axis = target_axis - 1 if target_axis > control_axis else target_axis
    psi[selector] = np.flip(psi[selector], axis=flip_axis).copy()
    return psi.reshape(amps.shape)


def init(n_qubits: int) -> Statevector:
    """|0...0> on ``n_qubits`` qubits"""
    _check_register_size(n_qubits)
    amps = np.zeros(2 ** n_qubits, dtype=complex)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


def apply_1q(state: Statevector, gate: np.ndarray, target: int) -> Statevector:
    gate = np.asarray(gate, dtype=complex)
    _check_unitary(gate)
    _check_index(target, state.n_qubits, "target")
    return Statevector(state.n_qubits, apply_1q_array(state.amps, gate, target, state.n_qubits))


def apply_cnot(state: Statevector, control: int, target: int) -> Statevector:
    if control == target:
        raise DomainError("CNOT control and target must differ")
    _check_index(control, state.n_qubits, "control")
    _check_index(target, state.n_qubits, "target")
    return Statevector(state.n_qubits, apply_cnot_array(state.amps, control, target, state.n_qubits))


def apply_op(state: Statevector, op: CircuitOp) -> Statevector:
    if op.kind == "cnot":
        return apply_cnot(state, *op.targets)
    return apply_1q(state, op.matrix, op.targets[0])


def run_circuit(state: Statevector, circuit: Circuit) -> Statevector:
    """Noiseless execution of every op in order"""
    if state.n_qubits != circuit.n_qubits:
        raise DomainError(
            f"circuit acts on {circuit.n_qubits} qubits but state has {state.n_qubits}"
        )
    for op in circuit.ops:
        state = apply_op(state, op)
    return state


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Full 2**n x 2**n matrix of a circuit (column k = image of basis state k)"""
    dim = 2 ** circuit.n_qubits
    columns = np.eye(dim, dtype=complex)
    for op in circuit.ops:
        if op.kind == "cnot":
            columns = apply_cnot_array(columns, op.targets[0], op.targets[1], circuit.n_qubits)
        else:
            columns = apply_1q_array(columns, op.matrix, op.targets[0], circuit.n_qubits)
    return columns.T


def sample(state: Statevector, shots: int, rng: np.random.Generator) -> Dict[str, int]:
    """Multinomial measurement record in the computational basis"""
    if shots < 1:
        raise DomainError(f"shots must be >= 1, got {shots}")
    counts = rng.multinomial(shots, state.probabilities())
    width = state.n_qubits
    return {format(i, f"0{width}b"): int(c) for i, c in enumerate(counts) if c > 0}


def reduced_density(state: Statevector, keep: int) -> DensityMatrix2:
    """Partial trace over every qubit except ``keep``"""
    _check_index(keep, state.n_qubits, "keep")
    psi = state.amps.reshape((2,) * state.n_qubits)
    psi = np.moveaxis(psi, keep, 0).reshape(2, -1)
    return DensityMatrix2(psi @ psi.conj().T)


def fidelity_pure(rho: DensityMatrix2, psi: Sequence[complex]) -> float:
    """<psi|rho|psi> for a normalized single-qubit ket"""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (2,):
        raise DomainError(f"psi must be a 2-vector, got shape {psi.shape}")
    if abs(np.vdot(psi, psi).real - 1.0) > NORM_TOLERANCE:
        raise DomainError("psi is not normalized")
    value = float(np.vdot(psi, rho.matrix @ psi).real)
    return min(1.0, max(0.0, value))
