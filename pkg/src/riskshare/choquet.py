"""Choquet integrals of distorted survival functions.

Everything is computed in *excess* coordinates ``x = s - s_lower`` where
``s_lower`` is the essential infimum of the risk, so that

    int Z d(T o P) = s_lower + int_0^span T(P(Z > s_lower + x)) dx,

which covers the negative part of the Choquet integral as well. Atomic laws
are summed exactly over the gaps between atoms; continuous laws go through
:func:`riskshare.quadrature.integrate` with the distortion kinks mapped to
breakpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distortion import DistortionFunction, DistortionSet
from .distribution import RiskDistribution
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig, integrate

__all__ = [
    "Retention",
    "kink_locations",
    "tail_integral",
    "partition_integrals",
    "choquet_integral",
    "coherent_risk",
    "retention_integrals",
    "risk_of_retention",
]

SLOPE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Retention:
    """Continuous piecewise-linear ``g`` with ``g(0) = 0``.

    ``slopes[j]`` applies on ``[breakpoints[j], breakpoints[j + 1]]``; beyond
    the last breakpoint ``g`` is constant.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).ravel()
        sl = np.asarray(self.slopes, dtype=float).ravel()
        if bp.size != sl.size + 1:
            raise ValueError("need exactly one more breakpoint than slopes")
        if bp[0] != 0.0:
            raise ValueError("retention breakpoints must start at 0")
        if np.any(np.diff(bp) < 0):
            raise ValueError("retention breakpoints must be non-decreasing")
        if np.any(sl < -SLOPE_TOL) or np.any(sl > 1 + SLOPE_TOL):
            raise ValueError("retention slopes must lie in [0, 1]")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", np.clip(sl, 0.0, 1.0))

    @classmethod
    def identity(cls, span: float) -> "Retention":
        return cls(np.array([0.0, span]), np.array([1.0]))

    @classmethod
    def zero(cls, span: float) -> "Retention":
        return cls(np.array([0.0, span]), np.array([0.0]))

    @property
    def knot_values(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.slopes * np.diff(self.breakpoints))])

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = np.interp(x_arr, self.breakpoints, self.knot_values,
                        left=0.0, right=self.knot_values[-1])
        return float(out) if np.ndim(x) == 0 else out


def kink_locations(dist: RiskDistribution, T: DistortionFunction) -> list[float]:
    """Excess levels ``x`` where ``P(S > s_lower + x)`` hits a kink of ``T``."""
    if dist.is_discrete:
        return []
    lo, _ = dist.essential_bounds()
    out = []
    for t in T.kinks:
        if 0.0 < t < 1.0:
            out.append(float(dist.quantile(1.0 - t)) - lo)
    return out


def _integrand(dist: RiskDistribution, T: DistortionFunction):
    lo, _ = dist.essential_bounds()

    def f(x):
        return T(dist.survival(lo + x))

    return f


def partition_integrals(dist: RiskDistribution, T: DistortionFunction, edges,
                        quad: QuadratureConfig = DEFAULT_QUADRATURE,
                        mask=None) -> np.ndarray:
    """``int_{edges[j]}^{edges[j+1]} T(P(S > s_lower + x)) dx`` for every cell.

    Cells with a false ``mask`` entry are skipped and reported as 0.
    """
    edges = np.asarray(edges, dtype=float)
    if mask is None:
        mask = np.ones(edges.size - 1, dtype=bool)
    if dist.is_discrete:
        lo, _ = dist.essential_bounds()
        widths, tails = dist.gap_survivals()
        gap_lo = dist.atoms[:-1] - lo
        gap_hi = dist.atoms[1:] - lo
        tvals = np.asarray(T(tails)) if tails.size else tails
        a = edges[:-1, None]
        b = edges[1:, None]
        overlap = np.clip(np.minimum(b, gap_hi[None, :]) - np.maximum(a, gap_lo[None, :]), 0.0, None)
        out = overlap @ tvals if tails.size else np.zeros(edges.size - 1)
        return np.where(mask, out, 0.0)
    f = _integrand(dist, T)
    kinks = kink_locations(dist, T)
    return np.array([
        integrate(f, a, b, kinks, quad) if m else 0.0
        for a, b, m in zip(edges[:-1], edges[1:], mask)
    ])


def tail_integral(dist: RiskDistribution, T: DistortionFunction, lo: float, hi: float,
                  quad: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """``int_lo^hi T(P(S > s_lower + x)) dx`` over an excess range."""
    return float(partition_integrals(dist, T, [lo, hi], quad)[0])


def choquet_integral(dist: RiskDistribution, T: DistortionFunction,
                     quad: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Distortion risk measure ``int Z d(T o P)`` of a law."""
    lo, hi = dist.essential_bounds()
    return lo + tail_integral(dist, T, 0.0, hi - lo, quad)


def coherent_risk(dist: RiskDistribution, dset: DistortionSet,
                  quad: QuadratureConfig = DEFAULT_QUADRATURE) -> tuple[float, int]:
    """Worst case over the hull of ``dset``; attained at a generator.

    Returns the value and the lowest maximizing generator index.
    """
    values = np.array([choquet_integral(dist, g, quad) for g in dset.generators])
    k = int(np.argmax(values))
    return float(values[k]), k


def retention_integrals(dist: RiskDistribution, g: Retention, dset: DistortionSet,
                        quad: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """``int T_k(P(S > s_lower + x)) g'(x) dx`` for every generator ``T_k``."""
    span = dist.span
    if g.breakpoints[-1] > span * (1 + 1e-9) + 1e-12:
        raise ValueError("retention breakpoints exceed the span of the aggregate risk")
    edges = np.minimum(g.breakpoints, span)
    active = g.slopes > 0
    out = np.zeros(len(dset))
    if not active.any():
        return out
    for k, T in enumerate(dset.generators):
        cell = partition_integrals(dist, T, edges, quad, mask=active)
        out[k] = float(cell[active] @ g.slopes[active])
    return out


def risk_of_retention(dist: RiskDistribution, g: Retention, dset: DistortionSet,
                      quad: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Coherent risk of ``g(S - s_lower)`` under the hull of ``dset``."""
    return float(retention_integrals(dist, g, dset, quad).max())
