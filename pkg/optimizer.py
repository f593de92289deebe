#!/usr/bin/env python3
"""
Optimal asymmetric clones via Lagrange multipliers.

Problem: for a fixed Bob shrinking factor eta_A, maximize eta_B = 2*mu*xi
subject to 2*mu*nu = eta_A and mu^2 + nu^2 + xi^2 = 1.

The closed form is the production path. ``solve_numerically`` and
``grid_search_eta_b`` are independent routes used to cross-check it.
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

import numpy as np
from scipy.optimize import minimize

from utils.errors import AnalysisError, DomainError
from utils.logger import get_logger

logger = get_logger("optimizer")

RESIDUAL_TOLERANCE = 1e-10


@dataclass(frozen=True)
class LagrangeSolution:
    mu: float
    nu: float
    xi: float
    lambda1: float
    lambda2: float
    eta_B: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _check_eta(eta_A: float):
    if not 0.0 < eta_A < 1.0:
        raise DomainError(f"eta_A must lie in the open interval (0, 1), got {eta_A}")


def multipliers(mu: float, nu: float, xi: float) -> Tuple[float, float]:
    """Multipliers implied by a stationary point: mu = l2*xi and nu = -l1*xi"""
    if xi == 0:
        raise DomainError("multipliers are undefined when xi = 0 (eta_A = 1)")
    return -nu / xi, mu / xi


def optimal_coefficients(eta_A: float) -> LagrangeSolution:
    """Positive-branch stationary point maximising eta_B"""
    _check_eta(eta_A)
    mu = 1 / np.sqrt(2)
    nu = eta_A / np.sqrt(2)
    xi = np.sqrt((1 - eta_A ** 2) / 2)
    lambda1, lambda2 = multipliers(mu, nu, xi)
    return LagrangeSolution(
        mu=float(mu), nu=float(nu), xi=float(xi),
        lambda1=float(lambda1), lambda2=float(lambda2),
        eta_B=float(2 * mu * xi),
    )


def lagrange_residuals(sol: LagrangeSolution, eta_A: float) -> np.ndarray:
    """The five stationarity and constraint equations, each zero at a solution"""
    mu, nu, xi, l1, l2 = sol.mu, sol.nu, sol.xi, sol.lambda1, sol.lambda2
    return np.array([
        xi - l1 * nu - l2 * mu,
        l1 * mu + l2 * nu,
        mu - l2 * xi,
        2 * mu * nu - eta_A,
        mu ** 2 + nu ** 2 + xi ** 2 - 1,
    ])


def is_stationary(sol: LagrangeSolution, eta_A: float, tol: float = RESIDUAL_TOLERANCE) -> bool:
    return bool(np.all(np.abs(lagrange_residuals(sol, eta_A)) < tol))


def frontier(grid: int) -> List[Tuple[float, float]]:
    """(eta_A, eta_B) pairs on the optimal frontier at eta_A = k/(grid+1), k = 1..grid"""
    if grid < 2:
        raise DomainError(f"frontier grid needs at least 2 points, got {grid}")
    etas = np.arange(1, grid + 1) / (grid + 1)
    return [(float(a), float(np.sqrt(1 - a ** 2))) for a in etas]


def frontier_by_angle(grid: int) -> List[Tuple[float, float]]:
    """Frontier sampled at cloning angles k*pi/(4*(grid+1)); odd grids hit (1/sqrt2, 1/sqrt2)"""
    if grid < 2:
        raise DomainError(f"frontier grid needs at least 2 points, got {grid}")
    thetas = np.arange(1, grid + 1) * np.pi / (4 * (grid + 1))
    return [(float(np.sin(2 * t)), float(np.cos(2 * t))) for t in thetas]


def solve_numerically(eta_A: float) -> LagrangeSolution:
    """Maximise 2*mu*xi with SLSQP under both equality constraints"""
    _check_eta(eta_A)
    constraints = (
        {"type": "eq", "fun": lambda v: 2 * v[0] * v[1] - eta_A,
         "jac": lambda v: np.array([2 * v[1], 2 * v[0], 0.0])},
        {"type": "eq", "fun": lambda v: v @ v - 1,
         "jac": lambda v: 2 * v},
    )
    start = np.array([0.6, eta_A / 1.2, 0.5])
    result = minimize(
        lambda v: -2 * v[0] * v[2],
        start,
        jac=lambda v: np.array([-2 * v[2], 0.0, -2 * v[0]]),
        constraints=constraints,
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    if not result.success:
        raise AnalysisError(f"constrained maximisation failed for eta_A={eta_A}: {result.message}")
    mu, nu, xi = (abs(float(x)) for x in result.x)
    lambda1, lambda2 = multipliers(mu, nu, xi)
    logger.debug(f"SLSQP solution for eta_A={eta_A}: mu={mu:.12f} nu={nu:.12f} xi={xi:.12f}")
    return LagrangeSolution(mu, nu, xi, lambda1, lambda2, 2 * mu * xi)


def grid_search_eta_b(eta_A: float, step: float = 1e-3) -> float:
    """Brute-force max of 2*mu*xi over the constraint surface.

    mu is swept on a grid; nu follows from 2*mu*nu = eta_A and xi from
    normalization, so every grid point is feasible.
    """
    _check_eta(eta_A)
    mu = np.arange(step, 1.0, step)
    nu = eta_A / (2 * mu)
    xi_squared = 1 - mu ** 2 - nu ** 2
    feasible = xi_squared >= 0
    if not np.any(feasible):
        raise AnalysisError(f"no feasible grid point for eta_A={eta_A} at step {step}")
    return float(np.max(2 * mu[feasible] * np.sqrt(xi_squared[feasible])))
