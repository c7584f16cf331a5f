"""Partition of the excess range into cells with a constant argmin set.

For distortions ``T_1..T_n`` the argmin set at level ``x`` is the set of agents
whose ``T_i(P(S > s_lower + x))`` is minimal. Comparisons use the values
themselves when the minimum is at most 1/2 and the complements ``1 - T_i``
otherwise, so both tails keep full relative precision. Two agents tie when
their compared quantities differ by at most ``tie_tol`` times the magnitude of
the minimal one.
"""

from __future__ import annotations

import numpy as np

from .distortion import DistortionFunction
from .distribution import RiskDistribution

DEFAULT_TIE_TOL = 1e-9
DEFAULT_SCAN_GRID = 4096
MERGE_FRACTION = 1e-8


def scores(dist: RiskDistribution, distortions, x) -> np.ndarray:
    """Monotone stand-ins for ``T_i(P(S > s_lower + x))``; shape ``(n, len(x))``."""
    lo, _ = dist.essential_bounds()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(dist.survival(lo + x))
    u = np.atleast_1d(dist.cdf(lo + x))
    return _scores_from(distortions, p, u)


def _scores_from(distortions, p, u) -> np.ndarray:
    vals = np.vstack([np.atleast_1d(T(p)) for T in distortions])
    high = vals.min(axis=0) > 0.5
    if high.any():
        comps = np.vstack([np.atleast_1d(T.complement(u)) for T in distortions])
        vals = np.where(high[None, :], -comps, vals)
    return vals


def argmin_sets(score: np.ndarray, tie_tol: float) -> list[frozenset]:
    best = score.min(axis=0)
    within = np.abs(score - best[None, :]) <= tie_tol * np.abs(best)[None, :]
    return [frozenset(np.flatnonzero(col).tolist()) for col in within.T]


def _discrete_partition(dist, distortions, tie_tol):
    lo, _ = dist.essential_bounds()
    edges = dist.atoms - lo
    widths, tails = dist.gap_survivals()
    heads = dist._head[:-1]
    labels = argmin_sets(_scores_from(distortions, tails, heads), tie_tol)
    return edges, labels


def _scan_points(span: float, grid: int) -> np.ndarray:
    h = span / grid
    mids = (np.arange(grid) + 0.5) * h
    fine = 0.5 * h * 2.0 ** -np.arange(1, 40)
    return np.unique(np.concatenate([fine, mids, span - fine]))


def _bisect(label_at, a: float, b: float, la, xtol: float) -> float:
    while b - a > xtol:
        m = 0.5 * (a + b)
        if label_at(m) == la:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _merge(edges: list[float], labels: list[frozenset], min_len: float):
    edges = list(edges)
    labels = list(labels)
    # absorb slivers into the longer neighbour
    changed = True
    while changed and len(labels) > 1:
        changed = False
        lengths = np.diff(edges)
        j = int(np.argmin(lengths))
        if lengths[j] < min_len:
            if j == 0:
                del edges[1]
                del labels[0]
            elif j == len(labels) - 1:
                del edges[-2]
                del labels[-1]
            elif lengths[j - 1] >= lengths[j + 1]:
                del edges[j]
                del labels[j]
            else:
                del edges[j + 1]
                del labels[j]
            changed = True
    out_e, out_l = [edges[0]], []
    for j, lab in enumerate(labels):
        if out_l and out_l[-1] == lab:
            out_e[-1] = edges[j + 1]
        else:
            out_l.append(lab)
            out_e.append(edges[j + 1])
    return out_e, out_l


def partition(dist: RiskDistribution, distortions, tie_tol: float = DEFAULT_TIE_TOL,
              scan_grid: int = DEFAULT_SCAN_GRID):
    """Return ``(edges, labels)``: cell ``j`` is ``[edges[j], edges[j+1]]``.

    Atomic laws are handled exactly gap by gap. Continuous laws are scanned on
    ``scan_grid`` cell midpoints (plus geometric refinements toward both ends)
    and every label change is bisected to ``1e-8 * span``.
    """
    distortions = list(distortions)
    n = len(distortions)
    span = dist.span
    if span <= 0:
        return np.array([0.0, 0.0]), [frozenset(range(n))]
    if dist.is_discrete:
        edges, labels = _discrete_partition(dist, distortions, tie_tol)
        edges, labels = _merge(list(edges), labels, 0.0)
        return np.asarray(edges), labels

    def label_at(x):
        return argmin_sets(scores(dist, distortions, [x]), tie_tol)[0]

    xs = _scan_points(span, scan_grid)
    labs = argmin_sets(scores(dist, distortions, xs), tie_tol)
    xtol = MERGE_FRACTION * span
    edges = [0.0]
    labels = [labs[0]]
    for k in range(1, xs.size):
        if labs[k] != labs[k - 1]:
            edges.append(_bisect(label_at, xs[k - 1], xs[k], labs[k - 1], xtol))
            labels.append(labs[k])
    edges.append(span)
    edges, labels = _merge(edges, labels, xtol)
    return np.asarray(edges), labels
