#!/usr/bin/env python3
"""
Crossover analysis of swept clone fidelities.

Each state's (theta, F_A) and (theta, F_B) series is fitted with a
quadratic; the fitted curves cross where Bob's clone overtakes Eve's,
and the fidelity there gives the critical error rate. Two resampling
schemes put an interval on the crossover:

  * coefficient perturbation - redraw the six fit coefficients from
    independent normals (diagonal of each covariance only) and re-solve
  * bootstrap - resample the records with replacement, refit, re-solve

Replicate ``r`` of a state always draws from the stream derived from
(seed, method, state index, r), so intervals do not depend on how the
replicates are scheduled across workers.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from bb84 import binary_entropy, critical_qber
from cloner import QUARTER_PI, STATE_LABELS
from experiment import ExperimentRecord
from utils.errors import AnalysisError, AnalysisResult, DomainError, NoCrossoverError, RankDeficientError
from utils.logger import get_logger, log_function_start, log_performance_metric
from utils.seeding import BOOTSTRAP_STREAM, MONTE_CARLO_STREAM, derive_rng

logger = get_logger("stats")

DOMAIN = (0.0, QUARTER_PI)
CONFIDENCE_LEVEL = 0.95
MAX_FAILURE_FRACTION = 0.5
MIN_MC_REPS = 100
MIN_BOOTSTRAP_RECORDS = 4
DEFAULT_REPS = 10000


@dataclass(frozen=True)
class QuadraticFit:
    """F(theta) = c0 + c1*theta + c2*theta^2 with its coefficient covariance"""
    coeffs: Tuple[float, float, float]
    cov: np.ndarray = field(repr=False, compare=False)
    n: int
    rss: float

    def __call__(self, theta):
        c0, c1, c2 = self.coeffs
        return c0 + c1 * theta + c2 * theta ** 2

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def to_dict(self) -> Dict:
        return {
            "coeffs": list(self.coeffs),
            "std_errors": self.std_errors.tolist(),
            "cov": self.cov.tolist(),
            "n": self.n,
            "rss": self.rss,
        }


@dataclass(frozen=True)
class IntersectionEstimate:
    theta_star: float
    fid_star: float

    @property
    def qber_star(self) -> float:
        return 1.0 - self.fid_star

    def to_dict(self) -> Dict[str, float]:
        return {"theta_star": self.theta_star, "fid_star": self.fid_star, "qber_star": self.qber_star}


@dataclass(frozen=True)
class IntervalEstimate:
    mean: float
    lo: float
    hi: float
    n_reps: int
    n_failures: int
    level: float = CONFIDENCE_LEVEL

    @property
    def half_width(self) -> float:
        return (self.hi - self.lo) / 2

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def to_dict(self) -> Dict:
        return {
            "mean": self.mean, "lo": self.lo, "hi": self.hi, "level": self.level,
            "n_reps": self.n_reps, "n_failures": self.n_failures,
        }


@dataclass(frozen=True)
class ReplicateEstimate:
    """Intervals for theta_star and qber_star plus the raw replicates (NaN = failed)"""
    theta: IntervalEstimate
    qber: IntervalEstimate
    theta_replicates: np.ndarray = field(repr=False, compare=False)
    qber_replicates: np.ndarray = field(repr=False, compare=False)

    def __iter__(self) -> Iterator[IntervalEstimate]:
        yield self.theta
        yield self.qber

    def to_dict(self) -> Dict:
        return {"theta_star": self.theta.to_dict(), "qber_star": self.qber.to_dict()}


def _design(theta: np.ndarray) -> np.ndarray:
    return np.vander(theta, 3, increasing=True)


def _solve_coefficients(theta: np.ndarray, fid: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients and design matrix; raises on rank deficiency"""
    X = _design(theta)
    coeffs, _, rank, _ = np.linalg.lstsq(X, fid, rcond=None)
    if rank < 3:
        raise RankDeficientError(
            f"quadratic fit needs 3 distinct angles; design matrix has rank {rank}",
            distinct_thetas=int(len(np.unique(theta))),
        )
    return coeffs, X


def fit_quadratic(points: Sequence[Tuple[float, float]]) -> QuadraticFit:
    """Ordinary least squares fit with covariance rss/(n-3) * (X^T X)^-1"""
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise DomainError(f"points must be (theta, fid) pairs, got shape {data.shape}")
    n = len(data)
    if n < 3:
        raise RankDeficientError(f"quadratic fit needs at least 3 points, got {n}")
    theta, fid = data[:, 0], data[:, 1]
    coeffs, X = _solve_coefficients(theta, fid)

    residuals = fid - X @ coeffs
    rss = float(residuals @ residuals)
    if n > 3:
        cov = rss / (n - 3) * np.linalg.inv(X.T @ X)
        cov = (cov + cov.T) / 2
    else:
        # exact interpolation leaves no degrees of freedom for a variance
        cov = np.zeros((3, 3))
    return QuadraticFit(tuple(float(c) for c in coeffs), cov, n, rss)


def _crossing(coeffs_a: np.ndarray, coeffs_b: np.ndarray,
              domain: Tuple[float, float] = DOMAIN) -> Tuple[float, float]:
    """(theta, F_A(theta)) where F_A - F_B turns from negative to positive"""
    d0, d1, d2 = np.asarray(coeffs_a, dtype=float) - np.asarray(coeffs_b, dtype=float)
    scale = max(np.max(np.abs(coeffs_a)), np.max(np.abs(coeffs_b)), 1.0)
    eps = 1e-14 * scale
    if abs(d0) <= eps and abs(d1) <= eps and abs(d2) <= eps:
        raise NoCrossoverError("curves are identical; no isolated crossing")

    if abs(d2) <= eps:
        roots = [-d0 / d1] if abs(d1) > eps else []
    else:
        disc = d1 * d1 - 4 * d2 * d0
        if disc < 0:
            roots = []
        else:
            # numerically stable pair: q/d2 and d0/q
            q = -(d1 + np.copysign(np.sqrt(disc), d1)) / 2
            roots = [q / d2, d0 / q] if q != 0 else [0.0]

    lo, hi = domain
    rising = sorted(r for r in roots if lo <= r <= hi and d1 + 2 * d2 * r > 0)
    if not rising:
        raise NoCrossoverError(
            f"no crossing from Eve's advantage to Bob's in [{lo:.6g}, {hi:.6g}]",
            roots=[float(r) for r in roots],
        )
    theta = float(rising[0])
    c0, c1, c2 = coeffs_a
    return theta, float(c0 + c1 * theta + c2 * theta * theta)


def intersect(fit_A: QuadraticFit, fit_B: QuadraticFit,
              domain: Tuple[float, float] = DOMAIN) -> IntersectionEstimate:
    theta, fid = _crossing(np.array(fit_A.coeffs), np.array(fit_B.coeffs), domain)
    return IntersectionEstimate(theta, fid)


def summarize_replicates(values: Sequence[float], level: float = CONFIDENCE_LEVEL) -> IntervalEstimate:
    """Mean and percentile interval of the finite replicates; NaN entries count as failures"""
    values = np.asarray(values, dtype=float)
    n_reps = len(values)
    finite = values[np.isfinite(values)]
    n_failures = n_reps - len(finite)
    if n_reps == 0 or len(finite) == 0:
        raise AnalysisError("no successful replicates", n_reps=n_reps, n_failures=n_failures)
    if n_failures > MAX_FAILURE_FRACTION * n_reps:
        raise AnalysisError(
            f"{n_failures} of {n_reps} replicates failed (more than {MAX_FAILURE_FRACTION:.0%})",
            n_reps=n_reps, n_failures=n_failures,
        )
    tail = (1 - level) / 2 * 100
    lo, hi = (float(v) for v in np.percentile(finite, [tail, 100 - tail]))
    if lo == hi:
        mean = lo
    else:
        mean = float(np.mean(finite))
        lo, hi = min(lo, mean), max(hi, mean)
    return IntervalEstimate(mean, lo, hi, n_reps, n_failures, level)


def _run_replicates(block: Callable, payload: Tuple, reps: int, workers: int) -> np.ndarray:
    """Evaluate replicates 0..reps-1 in contiguous blocks, possibly across processes"""
    n_blocks = max(1, min(reps, 4 * workers))
    bounds = np.linspace(0, reps, n_blocks + 1).astype(int)
    tasks = [(payload, int(start), int(stop)) for start, stop in zip(bounds[:-1], bounds[1:])]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(block, tasks))
    else:
        blocks = [block(task) for task in tasks]
    return np.vstack(blocks)


def _monte_carlo_block(task) -> np.ndarray:
    (mean_a, sd_a, mean_b, sd_b, seed, state_index, domain), start, stop = task
    out = np.full((stop - start, 2), np.nan)
    for i, r in enumerate(range(start, stop)):
        rng = derive_rng(seed, MONTE_CARLO_STREAM, state_index, r)
        coeffs_a = rng.normal(mean_a, sd_a)
        coeffs_b = rng.normal(mean_b, sd_b)
        try:
            out[i] = _crossing(coeffs_a, coeffs_b, domain)
        except NoCrossoverError:
            pass
    return out


def _bootstrap_block(task) -> np.ndarray:
    (theta, fid_a, fid_b, paired, seed, state_index, domain), start, stop = task
    n = len(theta)
    out = np.full((stop - start, 2), np.nan)
    for i, r in enumerate(range(start, stop)):
        rng = derive_rng(seed, BOOTSTRAP_STREAM, state_index, r)
        idx_a = rng.integers(0, n, n)
        idx_b = idx_a if paired else rng.integers(0, n, n)
        try:
            coeffs_a, _ = _solve_coefficients(theta[idx_a], fid_a[idx_a])
            coeffs_b, _ = _solve_coefficients(theta[idx_b], fid_b[idx_b])
            out[i] = _crossing(coeffs_a, coeffs_b, domain)
        except AnalysisError:
            pass
    return out


def _estimate_from(replicates: np.ndarray) -> ReplicateEstimate:
    theta = replicates[:, 0]
    qber = 1.0 - replicates[:, 1]
    return ReplicateEstimate(summarize_replicates(theta), summarize_replicates(qber), theta, qber)


def monte_carlo_ci(fit_A: QuadraticFit, fit_B: QuadraticFit, reps: int = DEFAULT_REPS, seed: int = 0,
                   state_index: int = 0, workers: int = 1,
                   domain: Tuple[float, float] = DOMAIN) -> ReplicateEstimate:
    """Intervals from redrawing each coefficient from N(fitted value, standard error)"""
    if reps < MIN_MC_REPS:
        raise DomainError(f"Monte-Carlo needs at least {MIN_MC_REPS} replicates, got {reps}")
    started = time.perf_counter()
    payload = (np.array(fit_A.coeffs), fit_A.std_errors, np.array(fit_B.coeffs), fit_B.std_errors,
               seed, state_index, domain)
    estimate = _estimate_from(_run_replicates(_monte_carlo_block, payload, reps, workers))
    log_performance_metric("monte_carlo_ci", time.perf_counter() - started, "stats",
                           reps=reps, failures=estimate.theta.n_failures)
    return estimate


def _record_arrays(records: Sequence) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(records) and isinstance(records[0], ExperimentRecord):
        rows = [(r.theta, r.fid_A, r.fid_B) for r in records]
    else:
        rows = records
    data = np.asarray(rows, dtype=float).reshape(-1, 3)
    return data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy()


def bootstrap_ci(records: Sequence, reps: int = DEFAULT_REPS, seed: int = 0, state_index: int = 0,
                 paired: bool = True, workers: int = 1,
                 domain: Tuple[float, float] = DOMAIN) -> ReplicateEstimate:
    """Intervals from resampling records with replacement and refitting both curves.

    ``records`` holds ExperimentRecords or (theta, fid_A, fid_B) triples of
    one state. With ``paired`` the same index draw feeds both fits.
    """
    theta, fid_a, fid_b = _record_arrays(records)
    if len(theta) < MIN_BOOTSTRAP_RECORDS:
        raise DomainError(f"bootstrap needs at least {MIN_BOOTSTRAP_RECORDS} records, got {len(theta)}")
    if reps < 1:
        raise DomainError(f"reps must be >= 1, got {reps}")
    # a degenerate design fails every replicate, so report it directly
    _solve_coefficients(theta, fid_a)

    started = time.perf_counter()
    payload = (theta, fid_a, fid_b, paired, seed, state_index, domain)
    estimate = _estimate_from(_run_replicates(_bootstrap_block, payload, reps, workers))
    log_performance_metric("bootstrap_ci", time.perf_counter() - started, "stats",
                           reps=reps, records=len(theta), paired=paired,
                           failures=estimate.theta.n_failures)
    return estimate


def cumulative_replicates(per_state: Sequence[Sequence[float]]) -> np.ndarray:
    """Equal-weight mean across states at each replicate index (NaN if any state failed there)"""
    if not per_state:
        raise DomainError("at least one replicate array is required")
    lengths = {len(a) for a in per_state}
    if len(lengths) != 1:
        raise DomainError(f"replicate arrays have mismatched lengths: {sorted(lengths)}")
    return np.mean(np.vstack([np.asarray(a, dtype=float) for a in per_state]), axis=0)


def aggregate_cumulative(per_state: Sequence[Sequence[float]]) -> IntervalEstimate:
    return summarize_replicates(cumulative_replicates(per_state))


def information_estimate(qber_replicates: Sequence[float]) -> IntervalEstimate:
    """Interval on 1 - h(qber), the information an eavesdropper could hold at that error rate"""
    q = np.asarray(qber_replicates, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise DomainError("error rates must lie in [0, 1]")
    return summarize_replicates(1.0 - binary_entropy(q))


def excess_over_theory(qber_mean: float) -> float:
    """How far an observed crossover error rate sits above the ideal-cloner threshold"""
    return qber_mean - critical_qber()


def fitted_curve_samples(fits: Dict[str, Tuple[QuadraticFit, QuadraticFit]],
                         points: int = 101) -> List[Tuple[str, float, float, float]]:
    """(state, theta, F_A fit, F_B fit) rows on an even grid across [0, pi/4]"""
    if points < 2:
        raise DomainError(f"points must be >= 2, got {points}")
    grid = np.linspace(DOMAIN[0], DOMAIN[1], points)
    rows = []
    for label, (fit_a, fit_b) in fits.items():
        rows.extend((label, float(t), float(fit_a(t)), float(fit_b(t))) for t in grid)
    return rows


@dataclass
class StateAnalysis:
    state: str
    fit_A: QuadraticFit
    fit_B: QuadraticFit
    point: IntersectionEstimate
    monte_carlo: ReplicateEstimate
    bootstrap: ReplicateEstimate

    def to_dict(self) -> Dict:
        return {
            "n": self.fit_A.n,
            "fit_a": self.fit_A.to_dict(),
            "fit_b": self.fit_B.to_dict(),
            "point": self.point.to_dict(),
            "monte_carlo": self.monte_carlo.to_dict(),
            "bootstrap": self.bootstrap.to_dict(),
        }


def analyze_state(state: str, records: Sequence[ExperimentRecord], reps: int = DEFAULT_REPS,
                  seed: int = 0, paired: bool = True, workers: int = 1) -> StateAnalysis:
    if len(records) < MIN_BOOTSTRAP_RECORDS:
        raise AnalysisError(
            f"state {state} has {len(records)} records; at least {MIN_BOOTSTRAP_RECORDS} are needed"
        )
    state_index = STATE_LABELS.index(state)
    fit_a = fit_quadratic([(r.theta, r.fid_A) for r in records])
    fit_b = fit_quadratic([(r.theta, r.fid_B) for r in records])
    point = intersect(fit_a, fit_b)
    mc = monte_carlo_ci(fit_a, fit_b, reps, seed, state_index, workers)
    boot = bootstrap_ci(records, reps, seed, state_index, paired, workers)
    logger.info(
        f"{state}: theta*={point.theta_star:.5f} qber*={point.qber_star:.5f} "
        f"bootstrap=({boot.qber.lo:.5f}, {boot.qber.hi:.5f})"
    )
    return StateAnalysis(state, fit_a, fit_b, point, mc, boot)


def analyze(grouped: Dict[str, Sequence[ExperimentRecord]], reps: int = DEFAULT_REPS, seed: int = 0,
            paired: bool = True, workers: int = 1) -> Tuple[Dict, Dict[str, StateAnalysis], AnalysisResult]:
    """Per-state analysis plus the cumulative block; one state's failure does not stop the others"""
    log_function_start("analyze", "stats", states=",".join(grouped), reps=reps, seed=seed, paired=paired)
    result = AnalysisResult()
    analyses: Dict[str, StateAnalysis] = {}
    for state, records in grouped.items():
        try:
            analyses[state] = analyze_state(state, records, reps, seed, paired, workers)
        except (AnalysisError, DomainError) as e:
            logger.warning(f"Analysis failed for {state}: {e}")
            result.add_error(state, e)

    report: Dict = {
        "states": {state: analysis.to_dict() for state, analysis in analyses.items()},
        "cumulative": None,
    }
    if analyses:
        if len(analyses) < len(STATE_LABELS):
            result.add_warning(
                f"cumulative estimate covers {len(analyses)} of {len(STATE_LABELS)} states: "
                + ", ".join(analyses)
            )
        report["cumulative"] = _cumulative_block(analyses, result)

    report.update(result.to_dict())
    return report, analyses, result


def _cumulative_block(analyses: Dict[str, StateAnalysis], result: AnalysisResult) -> Optional[Dict]:
    try:
        replicates = cumulative_replicates([a.bootstrap.qber_replicates for a in analyses.values()])
        qber = summarize_replicates(replicates)
        information = information_estimate(replicates)
    except AnalysisError as e:
        result.add_error("cumulative", e)
        return None
    return {
        "states": list(analyses),
        "qber_star": qber.to_dict(),
        "eve_information": information.to_dict(),
        "excess_over_theory": excess_over_theory(qber.mean),
    }
