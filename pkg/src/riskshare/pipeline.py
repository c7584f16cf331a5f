"""End-to-end market solve: optimal distortions, layers, retentions, payments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _layers
from .allocation import (
    LayerStructure,
    RetentionProfile,
    VerificationReport,
    balance_ties,
    build_retentions,
    layer_structure,
    retention_risks,
    side_payments,
    verify,
)
from .choquet import coherent_risk
from .distortion import DistortionSet
from .distribution import RiskDistribution
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig
from .solver import MinMaxProblem, MinMaxSolution, SolverOptions, solve

__all__ = ["MarketResult", "proportional_initial_risks", "solve_market"]


@dataclass
class MarketResult:
    problem: MinMaxProblem
    solution: MinMaxSolution
    layers: LayerStructure
    profile: RetentionProfile
    initial_risks: np.ndarray
    retained_risks: np.ndarray
    verification: VerificationReport

    @property
    def side_payments(self) -> np.ndarray:
        return self.profile.c

    @property
    def posterior_risks(self) -> np.ndarray:
        return self.retained_risks + self.profile.c

    @property
    def welfare_gain(self) -> float:
        return float(self.initial_risks.sum() - self.posterior_risks.sum())


def proportional_initial_risks(dist: RiskDistribution, sets: Sequence[DistortionSet], theta,
                               quad: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """``rho_i(theta_i S) = theta_i rho_i(S)`` by positive homogeneity."""
    theta = np.asarray(theta, dtype=float)
    return np.array([t * coherent_risk(dist, s, quad)[0] for t, s in zip(theta, sets)])


def solve_market(dist: RiskDistribution, sets: Sequence[DistortionSet], initial_risks=None,
                 initial_shares=None, tie_rule: str = "equal", tie_weights=None,
                 gain_shares=None, solver_options: SolverOptions = SolverOptions(),
                 quad: QuadratureConfig = DEFAULT_QUADRATURE,
                 tie_tol: float = _layers.DEFAULT_TIE_TOL,
                 scan_grid: int = _layers.DEFAULT_SCAN_GRID,
                 verify_tol: float = 1e-5, balance: bool = True) -> MarketResult:
    """Solve, build the layer allocation and make it individually rational.

    Initial risks come from ``initial_risks`` if given, else from
    ``initial_shares`` (``X_i = theta_i S``, equal shares by default).
    With ``balance`` the split of tied layers is adjusted by
    :func:`riskshare.allocation.balance_ties`; ``tie_rule`` then only breaks
    the remaining indifference.
    """
    sets = tuple(sets)
    n = len(sets)
    problem = MinMaxProblem(dist, sets, quad, tie_tol, scan_grid)
    if initial_risks is None:
        theta = np.full(n, 1.0 / n) if initial_shares is None else np.asarray(initial_shares, float)
        if theta.shape != (n,) or np.any(theta < 0) or abs(theta.sum() - 1.0) > 1e-9:
            raise ValueError("initial_shares must be non-negative and sum to 1")
        initial = proportional_initial_risks(dist, sets, theta, quad)
    else:
        initial = np.asarray(initial_risks, dtype=float)
        if initial.shape != (n,):
            raise ValueError("one initial risk per agent")

    solution = solve(problem, solver_options)
    layers = layer_structure(solution, dist, tie_tol, scan_grid)
    profile = build_retentions(layers, tie_rule, tie_weights)
    if balance:
        profile = balance_ties(profile, layers, problem)
    retained = retention_risks(profile, problem)
    c = side_payments(profile, problem, initial, gain_shares, retained=retained)
    profile = profile.with_payments(c)
    report = verify(profile, problem, solution, layers, initial, rel_tol=verify_tol)
    return MarketResult(problem, solution, layers, profile, initial, retained, report)
