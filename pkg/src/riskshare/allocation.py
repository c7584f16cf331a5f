"""From an optimal distortion vector to a comonotone Pareto-optimal allocation.

The pipeline is::

    layers = layer_structure(solution, dist)
    profile = build_retentions(layers, "equal")
    c = side_payments(profile, problem, initial_risks)
    report = verify(profile.with_payments(c), problem, solution, layers, initial_risks)

Agent ``i`` receives ``Y_i = g_i(S - s_lower) + c_i`` where ``g_i`` rises with
slope ``h_i`` on the layers whose argmin set contains ``i`` and is flat
elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog

from . import _layers
from .choquet import Retention, partition_integrals, retention_integrals
from .distribution import RiskDistribution
from .solver import MinMaxProblem, MinMaxSolution

__all__ = [
    "LayerStructure",
    "RetentionProfile",
    "VerificationReport",
    "InfeasibleError",
    "layer_structure",
    "build_retentions",
    "balance_ties",
    "retention_risks",
    "side_payments",
    "verify",
    "TIE_RULES",
]

TIE_RULES = ("lowest", "equal", "weights")


class InfeasibleError(ValueError):
    """Initial risks are lower than the optimum allows; inputs are inconsistent."""


@dataclass(frozen=True)
class LayerStructure:
    """Cells ``[breakpoints[j], breakpoints[j+1]]`` of the excess range and the
    (0-based) agents with the lowest distorted tail probability on each."""

    breakpoints: np.ndarray
    members: tuple[frozenset, ...]
    s_lower: float
    span: float
    n_agents: int
    tie_tol: float = _layers.DEFAULT_TIE_TOL

    def __post_init__(self):
        if len(self.breakpoints) != len(self.members) + 1:
            raise ValueError("need one more breakpoint than member sets")
        if any(not m for m in self.members):
            raise ValueError("every layer needs at least one member")

    @property
    def interior_breakpoints(self) -> np.ndarray:
        return np.asarray(self.breakpoints[1:-1])

    def members_at(self, x: float) -> frozenset:
        j = int(np.searchsorted(self.breakpoints, x, side="right")) - 1
        return self.members[min(max(j, 0), len(self.members) - 1)]

    def to_dict(self) -> dict:
        return {
            "breakpoints": [float(b) for b in self.breakpoints],
            "members": [sorted(m) for m in self.members],
        }


@dataclass(frozen=True)
class RetentionProfile:
    """Retention functions on a common grid plus side payments.

    ``slopes`` has shape ``(n_agents, n_cells)``; ``c`` is ``None`` until side
    payments are attached.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    s_lower: float
    c: np.ndarray | None = None

    @property
    def n_agents(self) -> int:
        return self.slopes.shape[0]

    @property
    def retentions(self) -> list[Retention]:
        return [Retention(self.breakpoints, row) for row in self.slopes]

    def values(self, x) -> np.ndarray:
        """``g_i(x)`` for every agent; shape ``(n_agents, len(x))``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.vstack([g(x) for g in self.retentions])

    def allocate(self, s) -> np.ndarray:
        """Allocation ``g_i(s - s_lower) + c_i``; shape ``(len(s), n_agents)``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        c = np.zeros(self.n_agents) if self.c is None else self.c
        return self.values(s - self.s_lower).T + c[None, :]

    def with_payments(self, c) -> "RetentionProfile":
        c = np.asarray(c, dtype=float)
        if c.shape != (self.n_agents,):
            raise ValueError("one side payment per agent")
        return replace(self, c=c)

    def to_dict(self) -> dict:
        return {
            "s_lower": float(self.s_lower),
            "breakpoints": [float(b) for b in self.breakpoints],
            "slopes": [[float(v) for v in row] for row in self.slopes],
            "c": None if self.c is None else [float(v) for v in self.c],
        }


def layer_structure(solution: MinMaxSolution, dist: RiskDistribution,
                    tie_tol: float = _layers.DEFAULT_TIE_TOL,
                    scan_grid: int = _layers.DEFAULT_SCAN_GRID) -> LayerStructure:
    """Cells of constant argmin set for the optimal distortions."""
    if scan_grid < 64:
        raise ValueError("scan_grid must be at least 64")
    edges, labels = _layers.partition(dist, solution.optimal_distortions, tie_tol, scan_grid)
    lo, hi = dist.essential_bounds()
    return LayerStructure(np.asarray(edges, dtype=float), tuple(labels), lo, hi - lo,
                          len(solution.optimal_distortions), tie_tol)


def build_retentions(layers: LayerStructure, tie_rule: str = "equal",
                     weights=None) -> RetentionProfile:
    """Marginal shares per layer, integrated into retention functions.

    ``tie_rule``: ``"lowest"`` gives the whole layer to the smallest index in
    the argmin set, ``"equal"`` splits it evenly, ``"weights"`` splits it in
    proportion to ``weights`` restricted to the argmin set.
    """
    if tie_rule not in TIE_RULES:
        raise ValueError(f"tie_rule must be one of {TIE_RULES}")
    n_agents = layers.n_agents
    if tie_rule == "weights":
        if weights is None:
            raise ValueError("tie_rule 'weights' needs a weight vector")
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (n_agents,) or np.any(weights < 0):
            raise ValueError("weights must be a non-negative vector with one entry per agent")
    slopes = np.zeros((n_agents, len(layers.members)))
    for j, members in enumerate(layers.members):
        idx = sorted(members)
        if tie_rule == "lowest":
            slopes[idx[0], j] = 1.0
        elif tie_rule == "equal":
            slopes[idx, j] = 1.0 / len(idx)
        else:
            mass = weights[idx].sum()
            if mass <= 0:
                raise ValueError(f"weights put no mass on layer members {idx}")
            slopes[idx, j] = weights[idx] / mass
    return RetentionProfile(np.asarray(layers.breakpoints, dtype=float), slopes, layers.s_lower)


def _generator_cells(problem: MinMaxProblem, edges) -> list[np.ndarray]:
    """Per agent, ``cells[k, j] = int over cell j of T_k(P(S > s_lower + x)) dx``."""
    return [np.vstack([partition_integrals(problem.dist, T, edges, problem.quad) for T in dset.generators])
            for dset in problem.sets]


TIE_SUBCELLS = 8


def _refine_ties(profile: RetentionProfile, layers: LayerStructure, dist):
    """Split tied cells: at atoms for atomic laws, into equal pieces otherwise."""
    bp = np.asarray(profile.breakpoints, dtype=float)
    new_bp, cols, members = [bp[0]], [], []
    for j, mem in enumerate(layers.members):
        a, b = bp[j], bp[j + 1]
        cuts = np.array([], dtype=float)
        if len(mem) > 1 and b > a:
            if dist.is_discrete:
                x = dist.atoms - dist.essential_bounds()[0]
                cuts = x[(x > a) & (x < b)]
            else:
                cuts = np.linspace(a, b, TIE_SUBCELLS + 1)[1:-1]
        for e in list(cuts) + [b]:
            new_bp.append(float(e))
            cols.append(profile.slopes[:, j])
            members.append(mem)
    return replace(profile, breakpoints=np.array(new_bp), slopes=np.column_stack(cols)), members


def balance_ties(profile: RetentionProfile, layers: LayerStructure, problem: MinMaxProblem,
                 tol: float = 1e-9) -> RetentionProfile:
    """Re-split tied layers so that the total risk is minimal.

    When several agents tie on a layer of positive length, the split matters
    for agents whose distortion set is a proper hull: the worst case of
    ``g_i`` over the hull may then exceed the integral under the optimal
    mixture. Tied cells are subdivided (at the atoms of an atomic law) and a
    linear program over the slopes on them first minimizes
    ``sum_i max_k int T_ik g_i'`` and then, among the minimizers, picks the
    split closest (in L1) to the one in ``profile``. Cells owned by a single
    agent are left untouched, so the layer condition is preserved.
    """
    widths = np.diff(np.asarray(profile.breakpoints, dtype=float))
    tied = [j for j, m in enumerate(layers.members) if len(m) > 1 and widths[j] > 0]
    if not tied or all(len(s) == 1 for s in problem.sets):
        return profile
    profile, members = _refine_ties(profile, layers, problem.dist)
    bp = profile.breakpoints
    widths = np.diff(bp)
    free = [j for j, m in enumerate(members) if len(m) > 1 and widths[j] > 0]
    n = profile.n_agents
    cells = _generator_cells(problem, bp)
    pairs = [(i, j) for j in free for i in sorted(members[j])]
    nh = len(pairs)
    h0 = np.array([profile.slopes[i, j] for i, j in pairs])
    fixed = profile.slopes.copy()
    fixed[:, free] = 0.0

    # variables: [h (nh), u (n)]
    rows, rhs = [], []
    for i in range(n):
        for k in range(cells[i].shape[0]):
            row = np.zeros(nh + n)
            for p, (a, j) in enumerate(pairs):
                if a == i:
                    row[p] = cells[i][k, j]
            row[nh + i] = -1.0
            rows.append(row)
            rhs.append(-float(cells[i][k] @ fixed[i]))
    A_ub, b_ub = np.array(rows), np.array(rhs)
    A_eq = np.zeros((len(free), nh + n))
    for p, (_, j) in enumerate(pairs):
        A_eq[free.index(j), p] = 1.0
    b_eq = np.ones(len(free))
    bounds = [(0.0, 1.0)] * nh + [(None, None)] * n
    c = np.concatenate([np.zeros(nh), np.ones(n)])
    first = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if first.status != 0:
        raise RuntimeError(f"tie balancing LP failed: {first.message}")
    best = float(first.fun)

    # second stage: variables [h, u, d], minimize sum d with d >= |h - h0|
    zeros = np.zeros((A_ub.shape[0], nh))
    A2 = [np.hstack([A_ub, zeros])]
    b2 = [b_ub]
    eye = np.eye(nh)
    A2.append(np.hstack([eye, np.zeros((nh, n)), -eye]))
    b2.append(h0)
    A2.append(np.hstack([-eye, np.zeros((nh, n)), -eye]))
    b2.append(-h0)
    A2.append(np.concatenate([np.zeros(nh), np.ones(n), np.zeros(nh)])[None, :])
    b2.append([best + tol * max(abs(best), 1.0)])
    second = linprog(
        np.concatenate([np.zeros(nh + n), np.ones(nh)]),
        A_ub=np.vstack(A2), b_ub=np.concatenate(b2),
        A_eq=np.hstack([A_eq, np.zeros((len(free), nh))]), b_eq=b_eq,
        bounds=bounds + [(0.0, None)] * nh, method="highs",
    )
    x = (second if second.status == 0 else first).x
    slopes = fixed
    for p, (i, j) in enumerate(pairs):
        slopes[i, j] = min(max(x[p], 0.0), 1.0)
    # renormalize tied cells exactly
    for j in free:
        idx = sorted(members[j])
        total = slopes[idx, j].sum()
        slopes[idx, j] = slopes[idx, j] / total if total > 0 else 1.0 / len(idx)
    return replace(profile, slopes=slopes)


def retention_risks(profile: RetentionProfile, problem: MinMaxProblem) -> np.ndarray:
    """``rho_i(g_i(S - s_lower))`` under each agent's full distortion set."""
    return np.array([
        retention_integrals(problem.dist, g, dset, problem.quad).max()
        for g, dset in zip(profile.retentions, problem.sets)
    ])


def side_payments(profile: RetentionProfile, problem: MinMaxProblem, initial_risks,
                  gain_shares=None, retained=None) -> np.ndarray:
    """Constants ``c_i`` summing to ``s_lower`` that make the allocation IR.

    The aggregate welfare gain ``sum_i rho_i(X_i) - sum_i rho_i(g_i) - s_lower``
    is split according to ``gain_shares`` (equal by default), so agent ``i``
    ends at ``rho_i(X_i) - gain_shares[i] * gain``.
    """
    n = profile.n_agents
    initial = np.asarray(initial_risks, dtype=float)
    if initial.shape != (n,):
        raise ValueError("one initial risk per agent")
    shares = np.full(n, 1.0 / n) if gain_shares is None else np.asarray(gain_shares, dtype=float)
    if shares.shape != (n,) or np.any(shares < 0) or abs(shares.sum() - 1) > 1e-12:
        raise ValueError("gain_shares must lie on the simplex")
    rho_g = retention_risks(profile, problem) if retained is None else np.asarray(retained)
    s_lower = problem.lower_bound_s
    gain = initial.sum() - rho_g.sum() - s_lower
    scale = max(problem.dist.span, abs(s_lower), 1.0)
    if gain < -1e-6 * scale:
        raise InfeasibleError(
            f"initial risks sum below the attainable optimum (welfare gain {gain:.6g})"
        )
    return initial - rho_g - shares * gain


@dataclass
class VerificationReport:
    feasibility_residual: float
    layer_violation: float
    total_risk: float
    optimal_total: float
    optimality_residual: float
    posterior_risks: list[float] = field(default_factory=list)
    initial_risks: list[float] | None = None
    ir_flags: list[bool] | None = None
    rel_tol: float = 1e-5
    span: float = 1.0

    @property
    def feasible(self) -> bool:
        return self.feasibility_residual <= 1e-9 * max(self.span, 1.0)

    @property
    def scale(self) -> float:
        return max(abs(self.optimal_total), 1e-12)

    @property
    def layers_ok(self) -> bool:
        return self.layer_violation <= 1e-12

    @property
    def optimal(self) -> bool:
        return abs(self.optimality_residual) <= self.rel_tol * self.scale

    @property
    def individually_rational(self) -> bool:
        return self.ir_flags is None or all(self.ir_flags)

    @property
    def passed(self) -> bool:
        return self.feasible and self.layers_ok and self.optimal and self.individually_rational

    def to_dict(self) -> dict:
        return {
            "feasibility_residual": self.feasibility_residual,
            "layer_violation": self.layer_violation,
            "total_risk": self.total_risk,
            "optimal_total": self.optimal_total,
            "optimality_residual": self.optimality_residual,
            "relative_optimality_residual": self.optimality_residual / self.scale,
            "posterior_risks": list(self.posterior_risks),
            "initial_risks": self.initial_risks,
            "ir_flags": self.ir_flags,
            "checks": {
                "feasible": self.feasible,
                "layers": self.layers_ok,
                "optimal": self.optimal,
                "individually_rational": self.individually_rational,
            },
            "passed": self.passed,
        }


def verify(profile: RetentionProfile, problem: MinMaxProblem, solution: MinMaxSolution,
           layers: LayerStructure | None = None, initial_risks=None,
           rel_tol: float = 1e-5, grid: int = 10001) -> VerificationReport:
    """Check feasibility, the layer condition, optimality and IR.

    * feasibility: ``max |sum_i g_i(x) - x|`` on ``grid`` points of the span;
    * layer condition: the largest slope given to an agent outside the argmin
      set on a cell of positive length;
    * optimality: ``sum_i rho_i(Y_i) - (value + s_lower)``;
    * IR: ``rho_i(Y_i) <= rho_i(X_i)`` up to ``1e-9`` of the span.
    """
    span = problem.dist.span
    xs = np.linspace(0.0, span, grid)
    feas = float(np.max(np.abs(profile.values(xs).sum(axis=0) - xs))) if span > 0 else 0.0

    if layers is None:
        layers = layer_structure(solution, problem.dist, problem.tie_tol, problem.scan_grid)
    violation = 0.0
    bp = profile.breakpoints
    for j in range(bp.size - 1):
        if bp[j + 1] - bp[j] <= 0:
            continue
        members = layers.members_at(0.5 * (bp[j] + bp[j + 1]))
        outside = [i for i in range(profile.n_agents) if i not in members]
        if outside:
            violation = max(violation, float(profile.slopes[outside, j].max()))

    rho_g = retention_risks(profile, problem)
    c = np.zeros(profile.n_agents) if profile.c is None else profile.c
    posterior = rho_g + c
    s_lower = problem.lower_bound_s
    expected = solution.value + (s_lower if profile.c is not None else 0.0)
    total = float(posterior.sum())

    ir = None
    init = None
    if initial_risks is not None:
        init = [float(v) for v in initial_risks]
        slack = 1e-9 * max(span, 1.0)
        ir = [bool(p <= x + slack) for p, x in zip(posterior, init)]
    return VerificationReport(
        feasibility_residual=feas,
        layer_violation=violation,
        total_risk=total,
        optimal_total=float(expected),
        optimality_residual=float(total - expected),
        posterior_risks=[float(v) for v in posterior],
        initial_risks=init,
        ir_flags=ir,
        rel_tol=rel_tol,
        span=span,
    )
