"""The max-min problem over products of distortion hulls.

Given the aggregate risk ``S`` and agents' distortion sets, find mixing
weights ``w_i`` (one simplex vector per agent) maximizing

    Psi(w) = int_0^span min_i T_i^w(P(S > s_lower + x)) dx,

where ``T_i^w`` is agent ``i``'s mixture. ``Psi`` is concave in the stacked
weights. Fix the argmin partition at ``w`` and assign each cell to its lowest
tied agent; integrating the generators over their owner's cells gives a
vector ``G`` with ``Psi(w) = <G, w>`` and ``Psi(w') <= <G, w'>`` for every
``w'``, i.e. an exact supergradient cut through the origin.

:func:`solve` runs Kelley's cutting-plane method on these cuts. Each master
problem is a small LP over the product of simplices (HiGHS via
``scipy.optimize.linprog``); its optimal value is an upper bound on the
maximum, so ``upper_bound - best_value`` certifies the result.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import _layers
from .choquet import partition_integrals
from .distortion import DistortionFunction, DistortionSet, mix
from .distribution import RiskDistribution
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig

__all__ = [
    "MinMaxProblem",
    "SolverOptions",
    "MinMaxSolution",
    "objective",
    "evaluate",
    "solve",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MinMaxProblem:
    dist: RiskDistribution
    sets: tuple[DistortionSet, ...]
    quad: QuadratureConfig = DEFAULT_QUADRATURE
    tie_tol: float = _layers.DEFAULT_TIE_TOL
    scan_grid: int = _layers.DEFAULT_SCAN_GRID

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        if len(self.sets) < 1:
            raise ValueError("need at least one agent")
        if self.scan_grid < 64:
            raise ValueError("scan_grid must be at least 64")

    @property
    def n_agents(self) -> int:
        return len(self.sets)

    @property
    def lower_bound_s(self) -> float:
        return self.dist.essential_bounds()[0]

    @property
    def sizes(self) -> list[int]:
        return [len(s) for s in self.sets]


METHODS = ("auto", "kelley", "lp")
MAX_LP_GAPS = 20000


@dataclass(frozen=True)
class SolverOptions:
    """``gap_tol`` is relative to the objective value.

    ``step_tol`` stops the iteration when the master LP proposes a point within
    that sup-distance of an earlier one. ``method`` picks the cutting-plane
    iteration (``"kelley"``), the exact linear program available for atomic
    laws (``"lp"``), or the latter whenever it applies (``"auto"``).
    """

    gap_tol: float = 1e-6
    max_iters: int = 500
    step_tol: float = 1e-10
    method: str = "auto"

    def __post_init__(self):
        if self.gap_tol <= 0:
            raise ValueError("gap_tol must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")


@dataclass
class MinMaxSolution:
    weights: list[np.ndarray]
    optimal_distortions: list[DistortionFunction]
    value: float
    iterations: int
    final_gap: float
    upper_bound: float
    converged: bool
    history: list[float] = field(default_factory=list)

    @property
    def convergence(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_gap": self.final_gap,
            "upper_bound": self.upper_bound,
            "converged": self.converged,
        }


def _check_weights(problem: MinMaxProblem, weights) -> list[np.ndarray]:
    if len(weights) != problem.n_agents:
        raise ValueError(f"expected {problem.n_agents} weight vectors")
    return [np.asarray(w, dtype=float) for w in weights]


def evaluate(problem: MinMaxProblem, weights):
    """Objective value, per-agent supergradients and the argmin partition."""
    weights = _check_weights(problem, weights)
    mixes = [mix(s, w) for s, w in zip(problem.sets, weights)]
    edges, labels = _layers.partition(problem.dist, mixes, problem.tie_tol, problem.scan_grid)
    owner = np.array([min(lab) for lab in labels])
    grads = []
    for i, dset in enumerate(problem.sets):
        mask = owner == i
        g = np.zeros(len(dset))
        if mask.any():
            for k, T in enumerate(dset.generators):
                g[k] = partition_integrals(problem.dist, T, edges, problem.quad, mask=mask).sum()
        grads.append(g)
    value = float(sum(g @ w for g, w in zip(grads, weights)))
    return value, grads, (edges, labels)


def objective(problem: MinMaxProblem, weights) -> float:
    """``int_0^span min_i T_i^w(P(S > s_lower + x)) dx``."""
    return evaluate(problem, weights)[0]


def _master_lp(cuts: list[np.ndarray], sizes: list[int], ub_hint: float):
    dim = sum(sizes)
    # variables: [t, w]; maximize t
    c = np.zeros(dim + 1)
    c[0] = -1.0
    A_ub = np.hstack([np.ones((len(cuts), 1)), -np.vstack(cuts)])
    b_ub = np.zeros(len(cuts))
    A_eq = np.zeros((len(sizes), dim + 1))
    start = 1
    for i, k in enumerate(sizes):
        A_eq[i, start:start + k] = 1.0
        start += k
    b_eq = np.ones(len(sizes))
    bounds = [(None, ub_hint)] + [(0.0, 1.0)] * dim
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"master LP failed: {res.message}")
    w = np.clip(res.x[1:], 0.0, 1.0) + 0.0
    out, start = [], 0
    for k in sizes:
        wi = w[start:start + k]
        out.append(wi / wi.sum())
        start += k
    return float(res.x[0]), out


def _vertex_gap(grads, weights) -> float:
    """Best-vertex linearization gap; bounds ``max Psi - Psi(w)`` from above."""
    return float(sum(g.max() - g @ w for g, w in zip(grads, weights)))


def _atomic_lp(problem: MinMaxProblem) -> list[np.ndarray]:
    """Exact maximizer for atomic laws.

    With gap widths ``d_j`` and generator values ``v_ikj`` on each gap the
    problem is ``max sum_j d_j z_j`` subject to ``z_j <= sum_k w_ik v_ikj``
    for every agent, ``w_i`` on the simplex.
    """
    dist = problem.dist
    widths, tails = dist.gap_survivals()
    m = widths.size
    sizes = problem.sizes
    dim = sum(sizes)
    n = problem.n_agents
    # variables: [z (m), w (dim)]
    A_ub = np.zeros((n * m, m + dim))
    start = m
    for i, dset in enumerate(problem.sets):
        vals = np.vstack([np.atleast_1d(T(tails)) for T in dset.generators])  # (k, m)
        rows = slice(i * m, (i + 1) * m)
        A_ub[rows, :m] = np.eye(m)
        A_ub[rows, start:start + sizes[i]] = -vals.T
        start += sizes[i]
    A_eq = np.zeros((n, m + dim))
    start = m
    for i, k in enumerate(sizes):
        A_eq[i, start:start + k] = 1.0
        start += k
    c = np.concatenate([-widths, np.zeros(dim)])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n * m), A_eq=A_eq, b_eq=np.ones(n),
                  bounds=[(0.0, 1.0)] * (m + dim), method="highs")
    if res.status != 0:
        raise RuntimeError(f"atomic LP failed: {res.message}")
    w = np.clip(res.x[m:], 0.0, 1.0) + 0.0
    out, start = [], 0
    for k in sizes:
        wi = w[start:start + k]
        out.append(wi / wi.sum())
        start += k
    return out


def _use_lp(problem: MinMaxProblem, opts: SolverOptions) -> bool:
    if opts.method == "kelley":
        return False
    atomic = problem.dist.is_discrete
    if opts.method == "lp":
        if not atomic:
            raise ValueError("method 'lp' needs an atomic law")
        return True
    return atomic and problem.dist.atoms.size - 1 <= MAX_LP_GAPS


def solve(problem: MinMaxProblem, opts: SolverOptions = SolverOptions()) -> MinMaxSolution:
    """Maximize the objective over the product of simplices.

    Atomic laws are solved exactly as a linear program (unless
    ``opts.method == "kelley"``); the reported gap is then the best-vertex
    gap at the LP solution. Otherwise the cutting-plane iteration runs.

    Stops once an iterate's best-vertex gap ``sum_i (max_k G_ik - <G_i, w_i>)``
    is at most ``gap_tol * |value|``; that iterate is returned. The gap is an
    upper bound on its suboptimality. If the master LP stalls on a previously
    visited point, the cutting-plane bound ``upper - best`` is used instead.

    Deterministic: starts from uniform weights and the LP solver is
    deterministic. If ``max_iters`` is exhausted the best iterate is returned
    with ``converged=False``.
    """
    sizes = problem.sizes
    w = [np.full(k, 1.0 / k) for k in sizes]
    value, grads, _ = evaluate(problem, w)
    history = [value]
    if all(k == 1 for k in sizes):
        return MinMaxSolution(w, [mix(s, x) for s, x in zip(problem.sets, w)],
                              value, 0, 0.0, value, True, history)
    if _use_lp(problem, opts):
        w = _atomic_lp(problem)
        value, grads, _ = evaluate(problem, w)
        gap = _vertex_gap(grads, w)
        return MinMaxSolution(w, [mix(s, x) for s, x in zip(problem.sets, w)],
                              value, 1, gap, value + gap, gap <= opts.gap_tol * max(abs(value), 1e-12),
                              history + [value])

    def tol(v):
        return opts.gap_tol * max(abs(v), 1e-12)

    best_w, best_v, best_gap = w, value, _vertex_gap(grads, w)
    cuts = [np.concatenate(grads)]
    visited = [np.concatenate(w)]
    ub_hint = problem.dist.span + 1.0
    upper = best_v + best_gap
    converged = best_gap <= tol(best_v)
    it = 0
    while not converged and it < opts.max_iters:
        it += 1
        lp_upper, w = _master_lp(cuts, sizes, ub_hint)
        upper = min(upper, lp_upper)
        flat = np.concatenate(w)
        if min(np.max(np.abs(flat - v)) for v in visited) < opts.step_tol:
            # the cut model no longer moves; fall back to the bound it certifies
            best_gap = min(best_gap, max(upper - best_v, 0.0))
            converged = best_gap <= tol(best_v)
            break
        visited.append(flat)
        value, grads, _ = evaluate(problem, w)
        cuts.append(np.concatenate(grads))
        gap = _vertex_gap(grads, w)
        upper = min(upper, value + gap)
        if gap <= tol(value):
            best_w, best_v, best_gap = w, value, gap
            converged = True
        elif value > best_v:
            best_w, best_v, best_gap = w, value, min(gap, max(upper - value, 0.0))
        history.append(best_v)
        log.debug("iter %d value %.12g gap %.3g upper %.12g", it, value, gap, upper)
    return MinMaxSolution(
        weights=best_w,
        optimal_distortions=[mix(s, x) for s, x in zip(problem.sets, best_w)],
        value=best_v,
        iterations=it,
        final_gap=float(best_gap),
        upper_bound=float(upper),
        converged=converged,
        history=history,
    )
