#!/usr/bin/env python3
"""
Cloning-angle sweep: for each BB84 state, draw cloning angles uniformly,
run the cloner for a number of shots and record how often each clone is
found in the prepared state.

Both clones are measured in the same shot, each in the preparation
basis. A match (outcome 0 for |+>/|+i>, outcome 1 for |->/|-i>) counts
towards that clone's fidelity estimate.
"""

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from cloner import (
    BOB_QUBIT, EVE_QUBIT, QUARTER_PI, STATE_BASIS, STATE_LABELS, STATE_SIGN,
    CloneAngles, basis_change_ops, build_circuit, prepare_ops,
)
from noise import NoiseModel, sample_outcomes
from statevector import Circuit
from utils.errors import DataError, DomainError
from utils.logger import get_logger, log_function_start, log_performance_metric
from utils.seeding import SWEEP_STREAM, derive_rng

logger = get_logger("experiment")

CSV_HEADER = ("state", "theta", "shots", "fid_a", "fid_b")


@dataclass(frozen=True)
class SweepConfig:
    states: Tuple[str, ...] = STATE_LABELS
    n_angles: int = 100
    shots: int = 100
    theta_min: float = 0.0
    theta_max: float = QUARTER_PI
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))

    def validate(self):
        if not self.states:
            raise DomainError("at least one BB84 state is required")
        unknown = [s for s in self.states if s not in STATE_LABELS]
        if unknown:
            raise DomainError(f"unknown BB84 state(s): {', '.join(unknown)}")
        if len(set(self.states)) != len(self.states):
            raise DomainError("states must not repeat")
        if self.n_angles < 3:
            raise DomainError(f"n_angles must be >= 3 for a quadratic fit, got {self.n_angles}")
        if self.shots < 1:
            raise DomainError(f"shots must be >= 1, got {self.shots}")
        if not 0.0 <= self.theta_min <= self.theta_max <= QUARTER_PI:
            raise DomainError(
                f"theta range [{self.theta_min}, {self.theta_max}] must lie inside [0, pi/4]"
            )
        if self.seed < 0:
            raise DomainError(f"seed must be non-negative, got {self.seed}")
        if self.workers < 1:
            raise DomainError(f"workers must be >= 1, got {self.workers}")

    def to_dict(self) -> Dict:
        return {
            "states": list(self.states),
            "n_angles": self.n_angles,
            "shots": self.shots,
            "theta_min": self.theta_min,
            "theta_max": self.theta_max,
            "noise": self.noise.to_dict(),
            "seed": self.seed,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class ExperimentRecord:
    state: str
    theta: float
    shots: int
    fid_A: float
    fid_B: float

    def to_row(self) -> List[str]:
        return [self.state, format(self.theta, ".17g"), str(self.shots), repr(self.fid_A), repr(self.fid_B)]


def sweep_circuit(label: str, theta: float) -> Circuit:
    """Prepare ``label``, clone at ``theta``, rotate both clones back to the computational basis"""
    basis = STATE_BASIS[label]
    circuit = Circuit(3, tuple(prepare_ops(label, BOB_QUBIT)))
    circuit = circuit.then(*build_circuit(CloneAngles.from_theta(theta)).ops)
    return circuit.then(*basis_change_ops(basis, BOB_QUBIT), *basis_change_ops(basis, EVE_QUBIT))


def measure_clones(label: str, theta: float, shots: int, noise: NoiseModel,
                   rng: np.random.Generator) -> Tuple[float, float]:
    """Shot estimates of (F_A, F_B) for one state at one cloning angle"""
    if label not in STATE_SIGN:
        raise DomainError(f"unknown BB84 state '{label}'")
    if shots < 1:
        raise DomainError(f"shots must be >= 1, got {shots}")
    outcomes = sample_outcomes(sweep_circuit(label, theta), [BOB_QUBIT, EVE_QUBIT], shots, noise, rng)
    expected = 0 if STATE_SIGN[label] > 0 else 1
    matches = np.count_nonzero(outcomes == expected, axis=0)
    return int(matches[0]) / shots, int(matches[1]) / shots


def point_angle(rng: np.random.Generator, cfg: SweepConfig) -> float:
    return float(rng.uniform(cfg.theta_min, cfg.theta_max))


def _run_point(task: Tuple[SweepConfig, int, int]) -> ExperimentRecord:
    cfg, state_index, point = task
    label = STATE_LABELS[state_index]
    rng = derive_rng(cfg.seed, SWEEP_STREAM, state_index, point)
    theta = point_angle(rng, cfg)
    fid_a, fid_b = measure_clones(label, theta, cfg.shots, cfg.noise, rng)
    return ExperimentRecord(label, theta, cfg.shots, fid_a, fid_b)


def run_sweep(cfg: SweepConfig) -> List[ExperimentRecord]:
    """Every (state, angle) point of the sweep, in generation order"""
    cfg.validate()
    log_function_start("run_sweep", "experiment", states=",".join(cfg.states),
                       n_angles=cfg.n_angles, shots=cfg.shots, seed=cfg.seed, workers=cfg.workers)
    started = time.perf_counter()

    # Streams are keyed by the label's position in the fixed order, not in cfg.states
    tasks = [(cfg, STATE_LABELS.index(label), point)
             for label in cfg.states for point in range(cfg.n_angles)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_point, tasks, chunksize=max(1, len(tasks) // (4 * cfg.workers))))
    else:
        records = [_run_point(task) for task in tasks]

    log_performance_metric("run_sweep", time.perf_counter() - started, "experiment",
                           records=len(records), noisy=cfg.noise.has_gate_noise)
    return records


def write_csv(records: Iterable[ExperimentRecord], path: Union[str, Path]) -> int:
    """Write records with the pinned column order; returns the number of data rows"""
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow(record.to_row())
            count += 1
    logger.info(f"Wrote {count} records to {path}")
    return count


def _parse_fidelity(text: str, name: str, path: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{name} is not a number: {text!r}", path, line) from None
    if not 0.0 <= value <= 1.0:
        raise DataError(f"{name} must lie in [0, 1], got {value}", path, line)
    return value


def _parse_row(row: Sequence[str], path: str, line: int) -> ExperimentRecord:
    if len(row) != len(CSV_HEADER):
        raise DataError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", path, line)
    state, theta_text, shots_text, fid_a_text, fid_b_text = row
    if state not in STATE_LABELS:
        raise DataError(f"unknown state {state!r}", path, line)
    try:
        theta = float(theta_text)
    except ValueError:
        raise DataError(f"theta is not a number: {theta_text!r}", path, line) from None
    if not math.isfinite(theta):
        raise DataError(f"theta must be finite, got {theta_text!r}", path, line)
    try:
        shots = int(shots_text)
    except ValueError:
        raise DataError(f"shots is not an integer: {shots_text!r}", path, line) from None
    if shots < 1:
        raise DataError(f"shots must be >= 1, got {shots}", path, line)
    return ExperimentRecord(
        state, theta, shots,
        _parse_fidelity(fid_a_text, "fid_a", path, line),
        _parse_fidelity(fid_b_text, "fid_b", path, line),
    )


def read_csv(path: Union[str, Path]) -> List[ExperimentRecord]:
    path = str(path)
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot open experiment file: {e.strerror}", path) from e

    records = []
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise DataError(f"header must be {','.join(CSV_HEADER)}", path, 1)
        for row in reader:
            if not row:
                continue
            records.append(_parse_row(row, path, reader.line_num))
    logger.debug(f"Read {len(records)} records from {path}")
    return records


def group_by_state(records: Iterable[ExperimentRecord]) -> Dict[str, List[ExperimentRecord]]:
    """Records per state, states in the fixed label order"""
    grouped: Dict[str, List[ExperimentRecord]] = {}
    for record in records:
        grouped.setdefault(record.state, []).append(record)
    return {label: grouped[label] for label in STATE_LABELS if label in grouped}
