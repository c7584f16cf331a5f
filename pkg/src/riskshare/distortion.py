"""Distortion functions and finitely generated convex sets of distortions.

A distortion is a non-decreasing map ``T: [0, 1] -> [0, 1]`` with ``T(0) = 0``
and ``T(1) = 1``. A concave distortion ``T`` induces the coherent risk measure
``Z -> int Z d(T o P)``; a :class:`DistortionSet` induces the risk measure that
takes the worst case over the convex hull of its generators.

Every distortion also exposes :meth:`~DistortionFunction.complement`, which
returns ``1 - T(1 - u)`` computed from ``u`` directly. Near ``t = 1`` the
values of several distortions are indistinguishable from 1 in double
precision while their complements are not, and the layer detection in
:mod:`riskshare.allocation` relies on that extra resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "DomainError",
    "DistortionFunction",
    "ExpectedShortfall",
    "PowerTail",
    "WangTransform",
    "Identity",
    "PiecewiseLinear",
    "Mixture",
    "DistortionSet",
    "evaluate",
    "mix",
    "concavity_check",
    "distortion_from_spec",
    "distortion_set_from_specs",
]

DOMAIN_SLACK = 1e-12
SIMPLEX_TOL = 1e-12


class DomainError(ValueError):
    """A probability argument fell outside [0, 1]."""


def _as_probability(t, name: str = "t") -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError(f"{name} contains NaN")
    if np.any(arr < -DOMAIN_SLACK) or np.any(arr > 1.0 + DOMAIN_SLACK):
        raise DomainError(f"{name} must lie in [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def _ret(arr: np.ndarray, like) -> Any:
    return float(arr) if np.ndim(like) == 0 else arr


class DistortionFunction:
    """Base class. Subclasses implement ``_eval`` and ``_complement``."""

    #: probability levels in (0, 1) where the function is not differentiable
    kinks: tuple[float, ...] = ()

    def __call__(self, t):
        arr = _as_probability(t)
        out = np.clip(self._eval(arr), 0.0, 1.0)
        out = np.where(arr <= 0.0, 0.0, np.where(arr >= 1.0, 1.0, out))
        return _ret(out, t)

    def complement(self, u):
        """Return ``1 - T(1 - u)``, accurate when ``u`` is tiny."""
        arr = _as_probability(u, "u")
        out = np.clip(self._complement(arr), 0.0, 1.0)
        out = np.where(arr <= 0.0, 0.0, np.where(arr >= 1.0, 1.0, out))
        return _ret(out, u)

    def _eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _complement(self, u: np.ndarray) -> np.ndarray:
        return 1.0 - self._eval(1.0 - u)

    def is_concave(self, grid_size: int = 1001) -> bool:
        return concavity_check(self, grid_size)

    def to_spec(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ExpectedShortfall(DistortionFunction):
    """``T(t) = min(t / alpha, 1)``, the distortion of ES at level ``alpha``."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")

    @property
    def kinks(self):
        return (self.alpha,) if self.alpha < 1.0 else ()

    def _eval(self, t):
        return np.minimum(t / self.alpha, 1.0)

    def _complement(self, u):
        return np.maximum(0.0, (self.alpha - 1.0 + u) / self.alpha)

    def to_spec(self):
        return {"type": "es", "alpha": self.alpha}


@dataclass(frozen=True)
class PowerTail(DistortionFunction):
    """``T(t) = min((t / alpha) ** exponent, 1)``."""

    alpha: float
    exponent: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0.0 < self.exponent <= 1.0:
            raise ValueError("exponent must lie in (0, 1]")

    @property
    def kinks(self):
        return (self.alpha,) if self.alpha < 1.0 else ()

    def _eval(self, t):
        with np.errstate(divide="ignore"):
            return np.minimum(np.power(t / self.alpha, self.exponent), 1.0)

    def _complement(self, u):
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = np.log1p(-u) - np.log(self.alpha)
            return np.maximum(0.0, -np.expm1(self.exponent * log_ratio))

    def to_spec(self):
        return {"type": "power", "alpha": self.alpha, "exponent": self.exponent}


@dataclass(frozen=True)
class WangTransform(DistortionFunction):
    """``T(t) = Phi(Phi^{-1}(t) + shift)`` with the endpoints fixed at 0 and 1.

    Concave for ``shift >= 0``. The normal CDF and its inverse come from
    ``scipy.special`` (``ndtr``/``ndtri``), accurate to a few ulps.
    """

    shift: float

    def __post_init__(self):
        if not np.isfinite(self.shift):
            raise ValueError("shift must be finite")

    def _eval(self, t):
        with np.errstate(divide="ignore"):
            return ndtr(ndtri(t) + self.shift)

    def _complement(self, u):
        # 1 - Phi(Phi^{-1}(1 - u) + c) = Phi(Phi^{-1}(u) - c)
        with np.errstate(divide="ignore"):
            return ndtr(ndtri(u) - self.shift)

    def to_spec(self):
        return {"type": "wang", "shift": self.shift}


@dataclass(frozen=True)
class Identity(DistortionFunction):
    """The undistorted probability; its risk measure is the mean."""

    def _eval(self, t):
        return t

    def _complement(self, u):
        return u

    def to_spec(self):
        return {"type": "identity"}


@dataclass(frozen=True)
class PiecewiseLinear(DistortionFunction):
    """Linear interpolation through ``(knots[j], values[j])``."""

    knots: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        if len(knots) != len(values) or len(knots) < 2:
            raise ValueError("knots and values must have equal length >= 2")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("knots must start at 0 and end at 1")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if values[0] != 0.0 or values[-1] != 1.0:
            raise ValueError("values must start at 0 and end at 1")
        if np.any(np.diff(values) < 0):
            raise ValueError("values must be non-decreasing")

    @property
    def kinks(self):
        return tuple(self.knots[1:-1])

    def _eval(self, t):
        return np.interp(t, self.knots, self.values)

    def to_spec(self):
        return {"type": "piecewise", "knots": list(self.knots), "values": list(self.values)}


@dataclass(frozen=True, eq=False)
class Mixture(DistortionFunction):
    """Convex combination ``sum_k weights[k] * generators[k]``."""

    generators: tuple[DistortionFunction, ...]
    weights: tuple[float, ...]

    @property
    def kinks(self):
        ks = set()
        for g, w in zip(self.generators, self.weights):
            if w > 0:
                ks.update(g.kinks)
        return tuple(sorted(ks))

    def _eval(self, t):
        out = np.zeros_like(t)
        for g, w in zip(self.generators, self.weights):
            if w != 0.0:
                out = out + w * g._eval(t)
        return out

    def _complement(self, u):
        out = np.zeros_like(u)
        for g, w in zip(self.generators, self.weights):
            if w != 0.0:
                out = out + w * g._complement(u)
        return out

    def to_spec(self):
        return {
            "type": "mixture",
            "weights": list(self.weights),
            "generators": [g.to_spec() for g in self.generators],
        }


def evaluate(T: DistortionFunction, t):
    """Evaluate ``T`` at ``t``; raises :class:`DomainError` outside [0, 1]."""
    return T(t)


def concavity_check(T: DistortionFunction, grid_size: int = 1001) -> bool:
    """Midpoint concavity test on every pair of a uniform grid on [0, 1]."""
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    grid = np.linspace(0.0, 1.0, grid_size)
    vals = np.asarray(T(grid))
    mids = 0.5 * (grid[:, None] + grid[None, :])
    mid_vals = np.asarray(T(mids.ravel())).reshape(mids.shape)
    chords = 0.5 * (vals[:, None] + vals[None, :])
    return bool(np.all(mid_vals >= chords - 1e-10))


def _check_simplex(weights, size: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != size:
        raise ValueError(f"expected {size} weights, got {w.size}")
    if np.any(w < -SIMPLEX_TOL) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("weights must lie on the probability simplex")
    w = np.clip(w, 0.0, None)
    return w / w.sum()


@dataclass(frozen=True)
class DistortionSet:
    """Convex hull of finitely many concave generator distortions."""

    generators: tuple[DistortionFunction, ...]
    label: str = ""
    check_concavity: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        gens = tuple(self.generators)
        object.__setattr__(self, "generators", gens)
        if not gens:
            raise ValueError("a distortion set needs at least one generator")
        if self.check_concavity:
            for k, g in enumerate(gens):
                if not concavity_check(g):
                    raise ValueError(f"generator {k} of {self.label!r} is not concave")

    def __len__(self):
        return len(self.generators)

    def mix(self, weights) -> DistortionFunction:
        return mix(self, weights)

    def to_spec(self) -> list[dict]:
        return [g.to_spec() for g in self.generators]


def mix(dset: DistortionSet, weights) -> DistortionFunction:
    """Member of the hull of ``dset`` selected by simplex ``weights``.

    A weight vector concentrated on one generator returns that generator.
    """
    w = _check_simplex(weights, len(dset.generators))
    nz = np.flatnonzero(w)
    if nz.size == 1 and w[nz[0]] == 1.0:
        return dset.generators[nz[0]]
    return Mixture(dset.generators, tuple(float(x) for x in w))


def distortion_from_spec(spec: dict) -> DistortionFunction:
    """Build a distortion from a tagged record such as ``{"type": "es", "alpha": 0.025}``."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValueError("distortion spec must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "es":
        return ExpectedShortfall(float(spec["alpha"]))
    if kind == "power":
        return PowerTail(float(spec["alpha"]), float(spec["exponent"]))
    if kind == "wang":
        return WangTransform(float(spec["shift"]))
    if kind == "identity":
        return Identity()
    if kind == "piecewise":
        return PiecewiseLinear(tuple(spec["knots"]), tuple(spec["values"]))
    if kind == "mixture":
        gens = tuple(distortion_from_spec(g) for g in spec["generators"])
        return Mixture(gens, tuple(float(w) for w in spec["weights"]))
    raise ValueError(f"unknown distortion type {kind!r}")


def distortion_set_from_specs(specs: Sequence[dict], label: str = "") -> DistortionSet:
    return DistortionSet(tuple(distortion_from_spec(s) for s in specs), label=label)
