#!/usr/bin/env python3
"""
BB84 in the equatorial bases with an optional cloning eavesdropper.

Alice encodes bit 1 as |+> / |+i> and bit 0 as |-> / |-i>. Eve clones
every qubit in flight, forwards the A-clone to Bob, stores the B-clone
and measures it in Alice's basis once the bases are announced. The
ancilla is discarded unmeasured.

The information-theoretic formulas (binary entropy, mutual information,
secret key rate) live here as well.
"""

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.special import entr

from cloner import (
    BOB_QUBIT, EVE_QUBIT, STATE_BASIS, STATE_LABELS, STATE_SIGN,
    CloneAngles, basis_change_ops, build_circuit, prepare_ops,
)
from noise import NoiseModel, sample_outcomes
from statevector import Circuit, link_op
from utils.errors import DomainError
from utils.logger import get_logger, log_performance_metric
from utils.seeding import PROTOCOL_STREAM, derive_rng

logger = get_logger("bb84")

BASES = ("X", "Y")
DEFAULT_SHARD_ROUNDS = 10000

# (bit, basis) -> state label; the +1 eigenstate of a basis carries bit 1
KEY_ENCODING: Dict[Tuple[int, str], str] = {
    (1 if STATE_SIGN[label] > 0 else 0, STATE_BASIS[label]): label for label in STATE_LABELS
}

# LABEL_INDEX[basis index, bit] -> position of the label in STATE_LABELS
LABEL_INDEX = np.array([
    [STATE_LABELS.index(KEY_ENCODING[(bit, basis)]) for bit in (0, 1)] for basis in BASES
])


@dataclass(frozen=True)
class KeyBit:
    value: int
    basis: str

    def __post_init__(self):
        if self.value not in (0, 1):
            raise DomainError(f"key bit must be 0 or 1, got {self.value}")
        if self.basis not in BASES:
            raise DomainError(f"basis must be X or Y, got {self.basis}")

    @property
    def state_label(self) -> str:
        return KEY_ENCODING[(self.value, self.basis)]


@dataclass
class ProtocolResult:
    rounds: int
    sifted_length: int
    alice_bits: np.ndarray = field(repr=False)
    bob_bits: np.ndarray = field(repr=False)
    eve_bits: np.ndarray = field(repr=False)
    e_B_hat: float
    e_E_hat: float
    eve_present: bool
    state_counts: Dict[str, int] = field(default_factory=dict)

    @property
    def sift_rate(self) -> float:
        return self.sifted_length / self.rounds

    @classmethod
    def from_sifted(cls, rounds: int, alice: np.ndarray, bob: np.ndarray, eve: np.ndarray,
                    labels: np.ndarray, eve_present: bool) -> "ProtocolResult":
        sifted = len(alice)
        e_b = float(np.count_nonzero(alice != bob)) / sifted if sifted else 0.0
        e_e = float(np.count_nonzero(alice != eve)) / sifted if sifted else 0.0
        counts = {label: int(np.count_nonzero(labels == i)) for i, label in enumerate(STATE_LABELS)}
        return cls(rounds, sifted, alice, bob, eve, e_b, e_e, eve_present, counts)

    @classmethod
    def combine(cls, shards: List["ProtocolResult"], labels: List[np.ndarray]) -> "ProtocolResult":
        return cls.from_sifted(
            sum(s.rounds for s in shards),
            np.concatenate([s.alice_bits for s in shards]),
            np.concatenate([s.bob_bits for s in shards]),
            np.concatenate([s.eve_bits for s in shards]),
            np.concatenate(labels),
            any(s.eve_present for s in shards),
        )

    def to_dict(self) -> Dict:
        return {
            "rounds": self.rounds,
            "sifted_length": self.sifted_length,
            "sift_rate": self.sift_rate,
            "e_B_hat": self.e_B_hat,
            "e_E_hat": self.e_E_hat,
            "eve_present": self.eve_present,
            "state_counts": dict(self.state_counts),
        }


@dataclass(frozen=True)
class RateReport:
    """Mutual informations and secret key rate, bits per sifted symbol"""
    I_AB: float
    I_AE: float
    I_BE: float
    S_raw: float

    @property
    def secure(self) -> bool:
        return self.S_raw > 0

    @property
    def S(self) -> float:
        return max(self.S_raw, 0.0)

    def to_dict(self) -> Dict:
        return {
            "I_AB": self.I_AB,
            "I_AE": self.I_AE,
            "I_BE": self.I_BE,
            "S": self.S,
            "S_raw": self.S_raw,
            "status": "secure" if self.secure else "insecure",
        }


def binary_entropy(p: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """h(p) in bits, with h(0) = h(1) = 0; elementwise on arrays, NaN passes through"""
    values = np.asarray(p, dtype=float)
    if np.any((values < 0.0) | (values > 1.0)):
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    h = (entr(values) + entr(1.0 - values)) / np.log(2)
    return float(h) if h.ndim == 0 else h


def _check_qber(e: float):
    if not 0.0 <= e <= 0.5:
        raise DomainError(f"error rate must lie in [0, 1/2], got {e}")


def eve_qber_from_bob(e_B: float) -> float:
    """Eve's error rate on the optimal frontier given Bob's"""
    _check_qber(e_B)
    return 0.5 - float(np.sqrt(e_B * (1 - e_B)))


def mutual_info(e: float) -> float:
    _check_qber(e)
    return 1.0 - binary_entropy(e)


def critical_qber() -> float:
    """Bob's error rate at which Eve's information equals Bob's"""
    return float(0.5 - np.sqrt(2) / 4)


def eve_information_bound() -> float:
    return mutual_info(critical_qber())


def theory_curves(theta: float) -> Tuple[float, float, float, float]:
    """(e_B, e_E, I_AB, I_AE) of the optimal cloner at cloning angle theta"""
    if not 0.0 <= theta <= np.pi / 4:
        raise DomainError(f"cloning angle must lie in [0, pi/4], got {theta}")
    e_b = (1 - np.sin(2 * theta)) / 2
    e_e = (1 - np.cos(2 * theta)) / 2
    # clamp roundoff below zero at the endpoints
    e_b, e_e = max(float(e_b), 0.0), max(float(e_e), 0.0)
    return e_b, e_e, mutual_info(e_b), mutual_info(e_e)


def rate_report(e_B: float) -> RateReport:
    """Key rate S = max(I_AB - I_AE, I_AB - I_BE), with I_BE taken equal to I_AE"""
    _check_qber(e_B)
    i_ab = mutual_info(e_B)
    i_ae = mutual_info(eve_qber_from_bob(e_B))
    i_be = i_ae
    return RateReport(I_AB=i_ab, I_AE=i_ae, I_BE=i_be, S_raw=max(i_ab - i_ae, i_ab - i_be))


def round_circuit(label: str, bob_basis: str, eve_angles: Optional[CloneAngles]) -> Tuple[Circuit, List[int]]:
    """Circuit for one round and the qubits to measure (Bob's first, then Eve's)"""
    if eve_angles is None:
        circuit = Circuit(1, tuple(prepare_ops(label, BOB_QUBIT)))
        circuit = circuit.then(link_op(BOB_QUBIT), *basis_change_ops(bob_basis, BOB_QUBIT))
        return circuit, [BOB_QUBIT]
    alice_basis = STATE_BASIS[label]
    circuit = Circuit(3, tuple(prepare_ops(label, BOB_QUBIT)))
    circuit = circuit.then(*build_circuit(eve_angles).ops)
    circuit = circuit.then(
        link_op(BOB_QUBIT),
        *basis_change_ops(bob_basis, BOB_QUBIT),
        *basis_change_ops(alice_basis, EVE_QUBIT),
    )
    return circuit, [BOB_QUBIT, EVE_QUBIT]


def _run_rounds(rounds: int, eve_angles: Optional[CloneAngles], noise: NoiseModel,
                rng: np.random.Generator) -> Tuple[ProtocolResult, np.ndarray]:
    alice_bits = rng.integers(0, 2, rounds).astype(np.uint8)
    alice_basis = rng.integers(0, 2, rounds)
    bob_basis = rng.integers(0, 2, rounds)
    # Eve without a clone can only guess
    eve_bits = rng.integers(0, 2, rounds).astype(np.uint8)
    bob_bits = np.zeros(rounds, dtype=np.uint8)

    labels = LABEL_INDEX[alice_basis, alice_bits]
    for label_index, label in enumerate(STATE_LABELS):
        for basis_index, basis in enumerate(BASES):
            rows = np.flatnonzero((labels == label_index) & (bob_basis == basis_index))
            if len(rows) == 0:
                continue
            circuit, measured = round_circuit(label, basis, eve_angles)
            outcomes = sample_outcomes(circuit, measured, len(rows), noise, rng)
            # outcome 0 means the plus state of the basis, which encodes bit 1
            bob_bits[rows] = 1 - outcomes[:, 0]
            if eve_angles is not None:
                eve_bits[rows] = 1 - outcomes[:, 1]

    sifted = alice_basis == bob_basis
    result = ProtocolResult.from_sifted(
        rounds, alice_bits[sifted], bob_bits[sifted], eve_bits[sifted],
        labels[sifted], eve_angles is not None,
    )
    return result, labels[sifted]


def run_protocol(rounds: int, eve_theta: Optional[float], noise: NoiseModel,
                 rng: np.random.Generator) -> ProtocolResult:
    """Prepare, (optionally) clone, measure and sift ``rounds`` qubits"""
    if rounds < 1:
        raise DomainError(f"rounds must be >= 1, got {rounds}")
    eve_angles = CloneAngles.from_theta(eve_theta) if eve_theta is not None else None
    result, _ = _run_rounds(rounds, eve_angles, noise, rng)
    if result.sifted_length == 0:
        logger.warning(f"No rounds survived sifting out of {rounds}")
    return result


def run_protocol_sharded(rounds: int, eve_theta: Optional[float], noise: NoiseModel, seed: int,
                         shard_rounds: int = DEFAULT_SHARD_ROUNDS) -> ProtocolResult:
    """Split the rounds into shards, each on its own stream derived from (seed, shard)"""
    if rounds < 1:
        raise DomainError(f"rounds must be >= 1, got {rounds}")
    if shard_rounds < 1:
        raise DomainError(f"shard_rounds must be >= 1, got {shard_rounds}")
    eve_angles = CloneAngles.from_theta(eve_theta) if eve_theta is not None else None

    started = time.perf_counter()
    shards, labels = [], []
    for shard, first in enumerate(range(0, rounds, shard_rounds)):
        size = min(shard_rounds, rounds - first)
        result, shard_labels = _run_rounds(size, eve_angles, noise, derive_rng(seed, PROTOCOL_STREAM, shard))
        shards.append(result)
        labels.append(shard_labels)
    combined = ProtocolResult.combine(shards, labels)
    log_performance_metric(
        "run_protocol", time.perf_counter() - started, "bb84",
        rounds=rounds, shards=len(shards), sifted=combined.sifted_length,
        e_B_hat=f"{combined.e_B_hat:.5f}", e_E_hat=f"{combined.e_E_hat:.5f}",
    )
    return combined
