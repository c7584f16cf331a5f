"""Laws of bounded risks: survival functions, quantiles and essential bounds.

Unbounded analytic families are truncated at their ``1 - truncation_mass``
quantile, i.e. the modeled variable is ``min(Z, q)``. The mass above ``q`` sits
on ``q`` itself, so ``survival(x) = 0`` for ``x >= q``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammainc, gammaincc, gammaincinv, gammainccinv, gammaln, ndtr, ndtri

__all__ = [
    "RiskDistribution",
    "Gamma",
    "Lognormal",
    "Uniform",
    "Empirical",
    "Discrete",
    "survival",
    "quantile",
    "essential_bounds",
    "distribution_from_spec",
    "read_samples_csv",
]

DEFAULT_TRUNCATION_MASS = 1e-9


def _ret(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _check_level(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("quantile level must lie in (0, 1)")
    return arr


class RiskDistribution:
    """Common interface. ``cdf`` is ``1 - survival`` computed without cancellation."""

    is_discrete = False

    def survival(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, p):
        raise NotImplementedError

    def essential_bounds(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def span(self) -> float:
        lo, hi = self.essential_bounds()
        return hi - lo

    def to_spec(self) -> dict:
        raise NotImplementedError


class _Truncated(RiskDistribution):
    """Continuous family on ``[lower, q]`` with ``q`` the truncation quantile."""

    truncation_mass: float

    def _upper(self) -> float:
        return float(self._raw_isf(np.asarray(self.truncation_mass)))

    def _raw_isf(self, q):
        """Inverse of the survival function at tail mass ``q``."""
        return self._raw_quantile(1.0 - q)

    def _lower(self) -> float:
        return 0.0

    def essential_bounds(self):
        return (self._lower(), self._upper())

    def survival(self, x):
        x_arr = np.asarray(x, dtype=float)
        lo, hi = self.essential_bounds()
        inner = np.clip(x_arr, lo, hi)
        out = np.where(x_arr < lo, 1.0, np.where(x_arr >= hi, 0.0, self._raw_survival(inner)))
        return _ret(out, x)

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        lo, hi = self.essential_bounds()
        inner = np.clip(x_arr, lo, hi)
        out = np.where(x_arr < lo, 0.0, np.where(x_arr >= hi, 1.0, self._raw_cdf(inner)))
        return _ret(out, x)

    def quantile(self, p):
        arr = _check_level(p)
        hi = self._upper()
        out = np.minimum(self._raw_quantile(arr), hi)
        return _ret(out, p)

    def pdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        lo, hi = self.essential_bounds()
        inside = (x_arr > lo) & (x_arr < hi)
        out = np.where(inside, self._raw_pdf(np.clip(x_arr, lo, hi)), 0.0)
        return _ret(out, x)


@dataclass(frozen=True)
class Gamma(_Truncated):
    """Gamma law with ``shape`` and ``scale``; survival is the regularized
    upper incomplete gamma function (``scipy.special.gammaincc``)."""

    shape: float
    scale: float
    truncation_mass: float = DEFAULT_TRUNCATION_MASS

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("shape and scale must be positive")
        if not 0.0 < self.truncation_mass < 0.5:
            raise ValueError("truncation_mass must lie in (0, 0.5)")

    def _raw_survival(self, x):
        return gammaincc(self.shape, x / self.scale)

    def _raw_cdf(self, x):
        return gammainc(self.shape, x / self.scale)

    def _raw_quantile(self, p):
        p = np.asarray(p, dtype=float)
        # invert whichever tail is small to keep relative accuracy
        with np.errstate(all="ignore"):
            lower = gammaincinv(self.shape, p)
            upper = gammainccinv(self.shape, 1.0 - p)
        return self.scale * np.where(p < 0.5, lower, upper)

    def _raw_isf(self, q):
        return self.scale * gammainccinv(self.shape, q)

    def _raw_pdf(self, x):
        with np.errstate(divide="ignore"):
            z = x / self.scale
            return np.exp((self.shape - 1) * np.log(z) - z - gammaln(self.shape)) / self.scale

    def to_spec(self):
        return {"type": "gamma", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Lognormal(_Truncated):
    """``exp(N(mu, sigma^2))``."""

    mu: float
    sigma: float
    truncation_mass: float = DEFAULT_TRUNCATION_MASS

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0.0 < self.truncation_mass < 0.5:
            raise ValueError("truncation_mass must lie in (0, 0.5)")

    def _z(self, x):
        with np.errstate(divide="ignore"):
            return (np.log(x) - self.mu) / self.sigma

    def _raw_survival(self, x):
        return ndtr(-self._z(x))

    def _raw_cdf(self, x):
        return ndtr(self._z(x))

    def _raw_quantile(self, p):
        p = np.asarray(p, dtype=float)
        with np.errstate(all="ignore"):
            z = np.where(p < 0.5, ndtri(p), -ndtri(1.0 - p))
        return np.exp(self.mu + self.sigma * z)

    def _raw_isf(self, q):
        with np.errstate(all="ignore"):
            return np.exp(self.mu - self.sigma * ndtri(q))

    def _raw_pdf(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self._z(x)
            out = np.exp(-0.5 * z * z) / (x * self.sigma * np.sqrt(2 * np.pi))
        return np.where(x > 0, out, 0.0)

    def to_spec(self):
        return {"type": "lognormal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Uniform(_Truncated):
    lo: float
    hi: float
    truncation_mass: float = field(default=0.0, repr=False)

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("hi must exceed lo")

    def _lower(self):
        return float(self.lo)

    def _upper(self):
        return float(self.hi)

    def _raw_survival(self, x):
        return (self.hi - x) / (self.hi - self.lo)

    def _raw_cdf(self, x):
        return (x - self.lo) / (self.hi - self.lo)

    def _raw_quantile(self, p):
        return self.lo + np.asarray(p, dtype=float) * (self.hi - self.lo)

    def _raw_pdf(self, x):
        return np.full_like(x, 1.0 / (self.hi - self.lo))

    def to_spec(self):
        return {"type": "uniform", "lo": self.lo, "hi": self.hi}


class _Atomic(RiskDistribution):
    """Finitely many atoms; survival and cdf are exact tail/head sums."""

    is_discrete = True
    atoms: np.ndarray
    probs: np.ndarray

    def _prepare(self, atoms: np.ndarray, probs: np.ndarray):
        object.__setattr__(self, "_head", np.cumsum(probs))
        tail = np.cumsum(probs[::-1])[::-1]
        # tail[j] = P(Z >= atoms[j]); shift to P(Z > atoms[j])
        object.__setattr__(self, "_tail", np.append(tail[1:], 0.0))

    def survival(self, x):
        x_arr = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.atoms, x_arr, side="right")
        # idx atoms are <= x; survival = P(Z > x) = tail above atom idx-1
        out = np.where(idx == 0, 1.0, self._tail[np.maximum(idx - 1, 0)])
        return _ret(out, x)

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.atoms, x_arr, side="right")
        out = np.where(idx == 0, 0.0, self._head[np.maximum(idx - 1, 0)])
        return _ret(out, x)

    def quantile(self, p):
        arr = _check_level(p)
        idx = np.searchsorted(self._head, arr - 1e-14, side="left")
        out = self.atoms[np.minimum(idx, self.atoms.size - 1)]
        return _ret(out, p)

    def essential_bounds(self):
        return (float(self.atoms[0]), float(self.atoms[-1]))

    def gap_survivals(self) -> tuple[np.ndarray, np.ndarray]:
        """Widths of the gaps between consecutive atoms and P(Z > x) on each gap."""
        return np.diff(self.atoms), self._tail[:-1]


@dataclass(frozen=True, eq=False)
class Discrete(_Atomic):
    """Atoms with strictly positive probabilities summing to one."""

    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float).ravel()
        probs = np.asarray(self.probs, dtype=float).ravel()
        if atoms.size == 0 or atoms.size != probs.size:
            raise ValueError("atoms and probs must be non-empty and of equal length")
        if np.any(np.diff(atoms) <= 0):
            raise ValueError("atoms must be strictly increasing")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be positive and sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        self._prepare(atoms, probs)

    @classmethod
    def from_outcomes(cls, values, probs) -> "Discrete":
        """Law of a variable taking ``values[j]`` with probability ``probs[j]``.

        Values may repeat and come in any order; probabilities of equal values
        are pooled and zero-probability outcomes dropped.
        """
        values = np.asarray(values, dtype=float).ravel()
        probs = np.asarray(probs, dtype=float).ravel()
        keep = probs > 0
        atoms, inverse = np.unique(values[keep], return_inverse=True)
        pooled = np.bincount(inverse, weights=probs[keep], minlength=atoms.size)
        return cls(atoms, pooled / pooled.sum())

    def scaled(self, factor: float) -> "Discrete":
        if factor <= 0:
            raise ValueError("factor must be positive")
        return Discrete(self.atoms * factor, self.probs)

    def shifted(self, offset: float) -> "Discrete":
        return Discrete(self.atoms + offset, self.probs)

    def to_spec(self):
        return {"type": "discrete", "atoms": self.atoms.tolist(), "probs": self.probs.tolist()}


@dataclass(frozen=True, eq=False)
class Empirical(_Atomic):
    """Equally weighted samples; probabilities are exact counts over n."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if s.size == 0 or not np.all(np.isfinite(s)):
            raise ValueError("samples must be a non-empty finite list")
        object.__setattr__(self, "samples", s)
        atoms, counts = np.unique(s, return_counts=True)
        n = s.size
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", counts / n)
        object.__setattr__(self, "_head", np.cumsum(counts) / n)
        tail_counts = n - np.cumsum(counts)
        object.__setattr__(self, "_tail", tail_counts / n)

    def to_spec(self):
        return {"type": "empirical", "samples": self.samples.tolist()}


def survival(dist: RiskDistribution, x):
    return dist.survival(x)


def quantile(dist: RiskDistribution, p):
    return dist.quantile(p)


def essential_bounds(dist: RiskDistribution) -> tuple[float, float]:
    return dist.essential_bounds()


def read_samples_csv(path, column=None) -> np.ndarray:
    """Read one numeric column of a CSV file.

    Without ``column`` the file is one real per line, no header. With an
    integer ``column`` the file is a header-less matrix; with a string it
    names a header field.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no data")
    if isinstance(column, str):
        header = [h.strip() for h in rows[0]]
        if column not in header:
            raise ValueError(f"{path}: no column named {column!r}")
        idx = header.index(column)
        rows = rows[1:]
    else:
        idx = 0 if column is None else int(column)
    try:
        return np.array([float(r[idx]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: bad numeric data in column {idx}") from exc


def distribution_from_spec(spec: dict, base_dir=None,
                           truncation_mass: float = DEFAULT_TRUNCATION_MASS) -> RiskDistribution:
    """Build a distribution from a tagged record such as ``{"type": "gamma", ...}``."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValueError("distribution spec must be an object with a 'type' field")
    kind = spec["type"]
    tm = float(spec.get("truncation_mass", truncation_mass))
    if kind == "gamma":
        return Gamma(float(spec["shape"]), float(spec["scale"]), tm)
    if kind == "lognormal":
        return Lognormal(float(spec["mu"]), float(spec["sigma"]), tm)
    if kind == "uniform":
        return Uniform(float(spec["lo"]), float(spec["hi"]))
    if kind == "discrete":
        return Discrete(np.asarray(spec["atoms"], float), np.asarray(spec["probs"], float))
    if kind == "empirical":
        if "samples" in spec:
            return Empirical(np.asarray(spec["samples"], float))
        path = Path(spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return Empirical(read_samples_csv(path, spec.get("column")))
    raise ValueError(f"unknown distribution type {kind!r}")
