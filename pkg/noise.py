#!/usr/bin/env python3
"""
Stochastic gate-error model emulating NISQ hardware.

After every gate each target qubit suffers, with the gate's error
probability, a Pauli drawn uniformly from {X, Y, Z} (a depolarizing
channel realised as trajectories). Measured bits are then flipped with
the readout error probability.

``sample_outcomes`` is the workhorse: it draws the fault pattern of every
shot up front, lets all fault-free shots share the noiseless outcome
distribution, and pushes only the faulty shots through the circuit as
one batch.
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from statevector import (
    PAULIS, Circuit, Statevector,
    apply_1q, apply_1q_array, apply_cnot_array, apply_op, init, run_circuit,
)
from cloner import BOB_QUBIT, EVE_QUBIT, build_circuit, equatorial_state, optimal_angles
from utils.errors import DomainError

# Quoted trapped-ion figures: 0.04% per single-qubit gate, 2.7% per two-qubit gate
DEFAULT_P1 = 0.0004
DEFAULT_P2 = 0.027


@dataclass(frozen=True)
class NoiseModel:
    p1: float = 0.0
    p2: float = 0.0
    p_readout: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2", "p_readout"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"noise probability {name} must lie in [0, 1], got {value}")

    @classmethod
    def default(cls) -> "NoiseModel":
        return cls(DEFAULT_P1, DEFAULT_P2, 0.0)

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0)

    @property
    def has_gate_noise(self) -> bool:
        return self.p1 > 0 or self.p2 > 0

    def gate_probability(self, two_qubit: bool) -> float:
        return self.p2 if two_qubit else self.p1

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def apply_gate_noise(state: Statevector, targets: Sequence[int], p: float,
                     rng: np.random.Generator) -> Statevector:
    """With probability p per target, hit that qubit with a uniformly random Pauli"""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"error probability must lie in [0, 1], got {p}")
    for target in targets:
        if rng.random() < p:
            state = apply_1q(state, PAULIS[rng.integers(3)], target)
    return state


def flip_readout(bits: Union[str, np.ndarray], p_readout: float,
                 rng: np.random.Generator) -> Union[str, np.ndarray]:
    """Flip each bit independently with probability p_readout"""
    if not 0.0 <= p_readout <= 1.0:
        raise DomainError(f"readout error probability must lie in [0, 1], got {p_readout}")
    as_text = isinstance(bits, str)
    array = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0") if as_text else np.asarray(bits, dtype=np.uint8)
    flipped = array ^ (rng.random(array.shape) < p_readout).astype(np.uint8)
    if as_text:
        return "".join(map(str, flipped.tolist()))
    return flipped


def run_noisy_circuit(state: Statevector, circuit: Circuit, noise: NoiseModel,
                      rng: np.random.Generator) -> Statevector:
    """One noisy trajectory, noise attached after every gate"""
    for op in circuit.ops:
        state = apply_op(state, op)
        state = apply_gate_noise(state, op.targets, noise.gate_probability(op.is_two_qubit), rng)
    return state


class _FaultSchedule:
    """Per-shot Pauli faults for every (gate, target) slot of a circuit"""

    def __init__(self, circuit: Circuit, noise: NoiseModel, shots: int, rng: np.random.Generator):
        self.slots: List[Tuple[int, int, np.ndarray, np.ndarray]] = []
        self.faulty = np.zeros(shots, dtype=bool)
        for index, op in enumerate(circuit.ops):
            p = noise.gate_probability(op.is_two_qubit)
            if p == 0:
                continue
            for target in op.targets:
                hit = rng.random(shots) < p
                kind = rng.integers(0, 3, shots)
                self.slots.append((index, target, hit, kind))
                self.faulty |= hit

    def propagate(self, initial: np.ndarray, circuit: Circuit, rows: np.ndarray) -> np.ndarray:
        """Amplitudes after the circuit for the selected shots, faults applied"""
        n = circuit.n_qubits
        amps = np.tile(initial, (len(rows), 1))
        by_gate: Dict[int, List[Tuple[int, np.ndarray, np.ndarray]]] = {}
        for index, target, hit, kind in self.slots:
            by_gate.setdefault(index, []).append((target, hit[rows], kind[rows]))
        for index, op in enumerate(circuit.ops):
            if op.kind == "cnot":
                amps = apply_cnot_array(amps, op.targets[0], op.targets[1], n)
            else:
                amps = apply_1q_array(amps, op.matrix, op.targets[0], n)
            for target, hit, kind in by_gate.get(index, ()):
                for k, pauli in enumerate(PAULIS):
                    selected = hit & (kind == k)
                    if selected.any():
                        amps[selected] = apply_1q_array(amps[selected], pauli, target, n)
        return amps


def _draw_indices(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One basis-state index per row of a (shots, dim) probability matrix"""
    cumulative = np.cumsum(probs, axis=1)
    cumulative /= cumulative[:, -1:]
    u = rng.random(len(probs))
    return np.minimum((cumulative < u[:, None]).sum(axis=1), probs.shape[1] - 1)


def _index_bits(indices: np.ndarray, measured: Sequence[int], n_qubits: int) -> np.ndarray:
    shifts = np.array([n_qubits - 1 - q for q in measured])
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def sample_outcomes(circuit: Circuit, measured: Sequence[int], shots: int, noise: NoiseModel,
                    rng: np.random.Generator, initial: Optional[Statevector] = None) -> np.ndarray:
    """Computational-basis outcomes of ``measured`` qubits, one row per shot"""
    if shots < 1:
        raise DomainError(f"shots must be >= 1, got {shots}")
    start = initial if initial is not None else init(circuit.n_qubits)
    clean_probs = run_circuit(start, circuit).probabilities()
    indices = np.empty(shots, dtype=np.int64)

    if noise.has_gate_noise:
        schedule = _FaultSchedule(circuit, noise, shots, rng)
        faulty_rows = np.flatnonzero(schedule.faulty)
        clean_rows = np.flatnonzero(~schedule.faulty)
    else:
        schedule, faulty_rows, clean_rows = None, np.empty(0, dtype=np.int64), np.arange(shots)

    if len(clean_rows):
        indices[clean_rows] = rng.choice(len(clean_probs), size=len(clean_rows), p=clean_probs)
    if len(faulty_rows):
        amps = schedule.propagate(start.amps, circuit, faulty_rows)
        indices[faulty_rows] = _draw_indices(np.abs(amps) ** 2, rng)

    bits = _index_bits(indices, measured, circuit.n_qubits)
    if noise.p_readout > 0:
        bits = flip_readout(bits, noise.p_readout, rng)
    return bits


def _projected_weight(amps: np.ndarray, psi: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """<psi| rho_qubit |psi> for every row of a batch of pure states"""
    tensor = amps.reshape((len(amps),) + (2,) * n_qubits)
    tensor = np.moveaxis(tensor, 1 + qubit, 1).reshape(len(amps), 2, -1)
    overlap = np.einsum("i,mij->mj", psi.conj(), tensor)
    return np.sum(np.abs(overlap) ** 2, axis=1)


def trajectory_fidelities(phi: float, theta: float, noise: NoiseModel, trajectories: int,
                          rng: np.random.Generator) -> Tuple[float, float]:
    """Ensemble-averaged (F_A, F_B) of the cloner on an equatorial input"""
    if trajectories < 1:
        raise DomainError(f"trajectories must be >= 1, got {trajectories}")
    psi = equatorial_state(phi)
    ket0 = np.array([1, 0], dtype=complex)
    start = Statevector.product(psi, ket0, ket0)
    circuit = build_circuit(optimal_angles(theta))
    n = circuit.n_qubits

    clean = run_circuit(start, circuit).amps[None, :]
    clean_a = float(_projected_weight(clean, psi, BOB_QUBIT, n)[0])
    clean_b = float(_projected_weight(clean, psi, EVE_QUBIT, n)[0])

    schedule = _FaultSchedule(circuit, noise, trajectories, rng)
    faulty_rows = np.flatnonzero(schedule.faulty)
    n_clean = trajectories - len(faulty_rows)
    total_a, total_b = clean_a * n_clean, clean_b * n_clean
    if len(faulty_rows):
        amps = schedule.propagate(start.amps, circuit, faulty_rows)
        total_a += float(_projected_weight(amps, psi, BOB_QUBIT, n).sum())
        total_b += float(_projected_weight(amps, psi, EVE_QUBIT, n).sum())
    return total_a / trajectories, total_b / trajectories
