"""Exhaustive checks on small atomic instances.

On an atomic aggregate risk the objective is an exact finite sum over the gaps
between atoms, so grids of mixing weights and of layer shares can be
enumerated outright and compared with :func:`riskshare.solver.solve` and with
the closed-form layer minimum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .distortion import DistortionSet, ExpectedShortfall, PowerTail, WangTransform
from .distribution import Discrete

__all__ = [
    "InstanceTooLarge",
    "DiscreteInstance",
    "LayerEnumeration",
    "brute_force_minmax",
    "brute_force_layer_allocations",
    "layer_minimum",
    "random_instance",
]

MAX_ATOMS = 12
MAX_AGENTS = 3
MAX_GENERATORS = 2
MAX_EVALUATIONS = 10 ** 7


class InstanceTooLarge(ValueError):
    """The instance exceeds the enumeration bounds."""


@dataclass(frozen=True)
class DiscreteInstance:
    dist: Discrete
    sets: tuple[DistortionSet, ...]
    weight_grid_step: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        if not isinstance(self.dist, Discrete):
            raise TypeError("oracle instances need a Discrete aggregate risk")
        if self.dist.atoms.size > MAX_ATOMS:
            raise InstanceTooLarge(f"at most {MAX_ATOMS} atoms")
        if len(self.sets) > MAX_AGENTS or not self.sets:
            raise InstanceTooLarge(f"between 1 and {MAX_AGENTS} agents")
        if any(len(s) > MAX_GENERATORS for s in self.sets):
            raise InstanceTooLarge(f"at most {MAX_GENERATORS} generators per agent")
        if np.any(self.dist.atoms < 0):
            raise ValueError("oracle atoms must be non-negative")
        if not 0 < self.weight_grid_step <= 1:
            raise ValueError("weight_grid_step must lie in (0, 1]")

    @property
    def scale(self) -> float:
        return max(self.dist.span, 1e-12)

    def generator_values(self) -> list[np.ndarray]:
        """Per agent, ``values[k, j] = T_k(P(S > x))`` on gap ``j``."""
        _, tails = self.dist.gap_survivals()
        return [np.vstack([np.atleast_1d(g(tails)) for g in s.generators]) for s in self.sets]


def _axis(instance: DiscreteInstance) -> tuple[np.ndarray, float]:
    free = sum(1 for s in instance.sets if len(s) == 2)
    points = int(round(1.0 / instance.weight_grid_step)) + 1
    if free and points ** free > MAX_EVALUATIONS:
        points = int(np.floor(MAX_EVALUATIONS ** (1.0 / free) + 1e-9))
    return np.linspace(0.0, 1.0, points), 1.0 / (points - 1)


def brute_force_minmax(instance: DiscreteInstance):
    """Grid maximum of the exact objective over the product of weight grids.

    Returns ``(value, weights, step)``; ``step`` is the grid step actually
    used, coarsened if needed to keep the grid below ``10**7`` points. Ties go
    to the lexicographically smallest grid index.
    """
    widths, _ = instance.dist.gap_survivals()
    axis, step = _axis(instance)
    # mixture values per agent: shape (grid points of agent, gaps)
    tables, grids = [], []
    for vals in instance.generator_values():
        if vals.shape[0] == 1:
            tables.append(vals)
            grids.append(np.ones((1, 1)))
        else:
            lam = axis[:, None]
            tables.append(lam * vals[0][None, :] + (1 - lam) * vals[1][None, :])
            grids.append(np.column_stack([axis, 1 - axis]))
    if widths.size == 0:
        return 0.0, [g[0] for g in grids], step

    head, rest = tables[0], tables[1:]
    if rest:
        inner = rest[0]
        for t in rest[1:]:
            inner = np.minimum(inner[:, None, :], t[None, :, :]).reshape(-1, widths.size)
    else:
        inner = None
    best_val, best_idx = -np.inf, None
    for a in range(head.shape[0]):
        m = head[a][None, :] if inner is None else np.minimum(head[a][None, :], inner)
        totals = m @ widths
        b = int(np.argmax(totals))
        if totals[b] > best_val:
            best_val, best_idx = float(totals[b]), (a, b)
    a, b = best_idx
    shapes = [t.shape[0] for t in rest]
    rest_idx = np.unravel_index(b, shapes) if shapes else ()
    idx = (a, *[int(i) for i in rest_idx])
    weights = [grids[i][idx[i]] for i in range(len(grids))]
    return best_val, weights, step


def layer_minimum(dist: Discrete, distortions) -> float:
    """Closed form ``sum_gaps width * min_i T_i(P(S > x))``."""
    widths, tails = dist.gap_survivals()
    if widths.size == 0:
        return 0.0
    vals = np.vstack([np.atleast_1d(T(tails)) for T in distortions])
    return float(vals.min(axis=0) @ widths)


@dataclass
class LayerEnumeration:
    """All comonotone layer allocations on a share grid.

    ``totals`` is indexed by a flat index over ``len(compositions) ** n_gaps``
    assignments; :meth:`shares` decodes one into an ``(n_gaps, n_agents)``
    array of marginal shares.
    """

    minimum: float
    closed_form: float
    totals: np.ndarray
    compositions: np.ndarray
    n_gaps: int

    def shares(self, flat_index: int) -> np.ndarray:
        idx = np.unravel_index(flat_index, (len(self.compositions),) * self.n_gaps)
        return self.compositions[list(idx)]


def _compositions(n: int, k: int) -> np.ndarray:
    out = [c for c in itertools.product(range(k + 1), repeat=n) if sum(c) == k]
    return np.array(out, dtype=float) / k


def brute_force_layer_allocations(instance: DiscreteInstance, share_grid: int = 11) -> LayerEnumeration:
    """Enumerate per-gap marginal shares on ``{0, 1/k, ..., 1}``, ``k = share_grid - 1``.

    Only for singleton distortion sets. Every assignment's total risk
    ``sum_i sum_gaps T_i(P(S > x)) h_i width`` is computed exactly.
    """
    if any(len(s) != 1 for s in instance.sets):
        raise ValueError("layer enumeration needs singleton distortion sets")
    if not 2 <= share_grid <= 11:
        raise InstanceTooLarge("share_grid must lie in [2, 11]")
    n = len(instance.sets)
    widths, tails = instance.dist.gap_survivals()
    n_gaps = widths.size
    if n * n_gaps > 12:
        raise InstanceTooLarge("at most 12 slope choices (agents x gaps)")
    comps = _compositions(n, share_grid - 1)
    if len(comps) ** n_gaps > MAX_EVALUATIONS:
        raise InstanceTooLarge("enumeration exceeds 10**7 assignments")
    vals = np.vstack([np.atleast_1d(s.generators[0](tails)) for s in instance.sets])  # (n, gaps)
    closed = layer_minimum(instance.dist, [s.generators[0] for s in instance.sets])
    if n_gaps == 0:
        return LayerEnumeration(0.0, closed, np.zeros(1), comps, 0)
    # cost[a, j] of composition a on gap j
    cost = (comps @ vals) * widths[None, :]
    totals = cost[:, 0]
    for j in range(1, n_gaps):
        totals = np.add.outer(totals, cost[:, j]).ravel()
    return LayerEnumeration(float(totals.min()), closed, totals, comps, n_gaps)


def _random_distortion(rng: np.random.Generator):
    # the identity lies below every concave distortion and would own every
    # layer, so it is left out of the random pool
    kind = rng.integers(3)
    if kind == 0:
        return ExpectedShortfall(float(rng.uniform(0.05, 1.0)))
    if kind == 1:
        return PowerTail(float(rng.uniform(0.1, 1.0)), float(rng.uniform(0.2, 1.0)))
    return WangTransform(float(rng.uniform(0.0, 2.0)))


def random_instance(rng: np.random.Generator, max_atoms: int = MAX_ATOMS,
                    max_agents: int = MAX_AGENTS, singleton: bool = False,
                    weight_grid_step: float = 1e-3) -> DiscreteInstance:
    """Random atomic instance within the oracle bounds."""
    m = int(rng.integers(2, max_atoms + 1))
    atoms = np.sort(rng.choice(np.arange(0, 50), size=m, replace=False)).astype(float)
    probs = rng.dirichlet(np.ones(m))
    probs = probs / probs.sum()
    probs[-1] = 1.0 - probs[:-1].sum()
    if probs[-1] <= 0:
        probs = np.full(m, 1.0 / m)
    n = int(rng.integers(2, max_agents + 1))
    sets = []
    for i in range(n):
        k = 1 if singleton else int(rng.integers(1, MAX_GENERATORS + 1))
        sets.append(DistortionSet(tuple(_random_distortion(rng) for _ in range(k)),
                                  label=f"agent {i + 1}", check_concavity=False))
    return DiscreteInstance(Discrete(atoms, probs), tuple(sets), weight_grid_step)
