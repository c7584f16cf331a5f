"""Market configuration: a versioned JSON document.

Example::

    {
      "schema_version": 1,
      "aggregate": {"type": "gamma", "shape": 2, "scale": 10},
      "agents": [
        {"label": "A", "distortions": [{"type": "es", "alpha": 0.01}],
         "initial": {"type": "proportional", "theta": 0.5}},
        ...
      ],
      "solver": {"gap_tol": 1e-6, "max_iters": 500},
      "quadrature": {"abs_tol": null, "rel_tol": 1e-8},
      "tie_rule": "equal",
      "layers": {"tie_tol": 1e-9, "scan_grid": 4096},
      "output": {"dir": "out", "grid": 1001}
    }

Initial positions are ``proportional`` (``X_i = theta_i S``), ``precomputed``
(``{"rho_x": ...}``) or ``empirical_column`` (``{"path": ..., "column": ...}``,
a joint sample matrix whose row sums must match the aggregate samples).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import _layers
from .choquet import coherent_risk
from .distortion import DistortionSet, distortion_set_from_specs
from .distribution import (
    DEFAULT_TRUNCATION_MASS,
    Empirical,
    RiskDistribution,
    distribution_from_spec,
    read_samples_csv,
)
from .quadrature import QuadratureConfig
from .solver import SolverOptions

__all__ = ["ConfigError", "AgentConfig", "MarketConfig", "load_config", "parse_config", "initial_risks"]

SCHEMA_VERSION = 1
INITIAL_TYPES = ("proportional", "precomputed", "empirical_column")
ROW_SUM_TOL = 1e-9


class ConfigError(ValueError):
    """Schema violation, tagged with the offending field."""

    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


@dataclass
class AgentConfig:
    label: str
    distortions: DistortionSet
    initial_type: str
    theta: float | None = None
    rho_x: float | None = None
    samples: np.ndarray | None = None


@dataclass
class MarketConfig:
    aggregate: RiskDistribution
    agents: list[AgentConfig]
    solver: SolverOptions = field(default_factory=SolverOptions)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    tie_rule: str = "equal"
    tie_tol: float = _layers.DEFAULT_TIE_TOL
    scan_grid: int = _layers.DEFAULT_SCAN_GRID
    out_dir: str = "out"
    grid: int = 1001
    truncation_mass: float = DEFAULT_TRUNCATION_MASS
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def sets(self) -> list[DistortionSet]:
        return [a.distortions for a in self.agents]

    @property
    def labels(self) -> list[str]:
        return [a.label for a in self.agents]

    @property
    def initial_type(self) -> str:
        return self.agents[0].initial_type

    @property
    def theta(self) -> np.ndarray | None:
        if self.initial_type != "proportional":
            return None
        return np.array([a.theta for a in self.agents])


def _number(value: Any, name: str, lo: float | None = None, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, "must be a number")
    v = float(value)
    if not np.isfinite(v):
        raise ConfigError(name, "must be finite")
    if positive and v <= 0:
        raise ConfigError(name, "must be positive")
    if lo is not None and v < lo:
        raise ConfigError(name, f"must be at least {lo}")
    return v


def _integer(value: Any, name: str, lo: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(name, "must be an integer")
    if value < lo:
        raise ConfigError(name, f"must be at least {lo}")
    return value


def _object(value: Any, name: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(name, "must be an object")
    return value


def _resolve(path: str, base_dir: Path | None) -> Path:
    p = Path(path)
    if base_dir is not None and not p.is_absolute():
        p = base_dir / p
    return p


def _raw_aggregate_samples(spec: dict, base_dir: Path | None) -> np.ndarray | None:
    if spec.get("type") != "empirical":
        return None
    if "samples" in spec:
        return np.asarray(spec["samples"], dtype=float)
    return read_samples_csv(_resolve(spec["path"], base_dir), spec.get("column"))


def _parse_agent(i: int, raw: Any, base_dir: Path | None) -> AgentConfig:
    name = f"agents[{i}]"
    raw = _object(raw, name)
    label = raw.get("label", f"agent {i + 1}")
    if not isinstance(label, str):
        raise ConfigError(f"{name}.label", "must be a string")
    specs = raw.get("distortions")
    if not isinstance(specs, list) or not specs:
        raise ConfigError(f"{name}.distortions", "must be a non-empty list of distortion records")
    try:
        dset = distortion_set_from_specs(specs, label=label)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name}.distortions", str(exc)) from exc

    init = raw.get("initial", {"type": "proportional"})
    init = _object(init, f"{name}.initial")
    kind = init.get("type")
    if kind not in INITIAL_TYPES:
        raise ConfigError(f"{name}.initial.type", f"must be one of {INITIAL_TYPES}")
    agent = AgentConfig(label, dset, kind)
    if kind == "proportional":
        if "theta" in init:
            agent.theta = _number(init["theta"], f"{name}.initial.theta", lo=0.0)
    elif kind == "precomputed":
        agent.rho_x = _number(init.get("rho_x"), f"{name}.initial.rho_x")
    else:
        if "path" not in init or "column" not in init:
            raise ConfigError(f"{name}.initial", "empirical_column needs 'path' and 'column'")
        try:
            agent.samples = read_samples_csv(_resolve(init["path"], base_dir), init["column"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{name}.initial.path", str(exc)) from exc
    return agent


def parse_config(doc: dict, base_dir=None, truncation_mass: float | None = None) -> MarketConfig:
    """Validate a parsed JSON document and build a :class:`MarketConfig`.

    ``truncation_mass`` overrides the value in the document. Relative paths
    resolve against ``base_dir``.
    """
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "must be a JSON object")
    base_dir = Path(base_dir) if base_dir is not None else None
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"must be {SCHEMA_VERSION}")

    tm = doc.get("truncation_mass", DEFAULT_TRUNCATION_MASS) if truncation_mass is None else truncation_mass
    tm = _number(tm, "truncation_mass", positive=True)
    if tm >= 0.5:
        raise ConfigError("truncation_mass", "must be below 0.5")

    agg_spec = _object(doc.get("aggregate"), "aggregate")
    try:
        aggregate = distribution_from_spec(agg_spec, base_dir, tm)
        agg_samples = _raw_aggregate_samples(agg_spec, base_dir)
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError("aggregate", str(exc)) from exc

    raw_agents = doc.get("agents")
    if not isinstance(raw_agents, list) or not raw_agents:
        raise ConfigError("agents", "must be a non-empty list")
    agents = [_parse_agent(i, a, base_dir) for i, a in enumerate(raw_agents)]
    kinds = {a.initial_type for a in agents}
    if len(kinds) > 1:
        raise ConfigError("agents", "all agents must use the same initial position type")
    kind = kinds.pop()
    n = len(agents)
    if kind == "proportional":
        given = [a.theta is not None for a in agents]
        if not any(given):
            for a in agents:
                a.theta = 1.0 / n
        elif not all(given):
            raise ConfigError("agents", "theta must be given for every agent or for none")
        total = sum(a.theta for a in agents)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError("agents.initial.theta", f"shares must sum to 1 (got {total:.12g})")
    elif kind == "empirical_column":
        if agg_samples is None:
            raise ConfigError("aggregate", "empirical_column positions need an empirical aggregate")
        sizes = {a.samples.size for a in agents}
        if sizes != {agg_samples.size}:
            raise ConfigError("agents.initial", "columns must have as many rows as the aggregate samples")
        rows = np.sum([a.samples for a in agents], axis=0)
        worst = float(np.max(np.abs(rows - agg_samples)))
        if worst > ROW_SUM_TOL * max(1.0, float(np.max(np.abs(agg_samples)))):
            raise ConfigError("agents.initial", f"row sums differ from aggregate samples by {worst:.3g}")

    solver = _object(doc.get("solver"), "solver")
    try:
        opts = SolverOptions(
            gap_tol=_number(solver.get("gap_tol", 1e-6), "solver.gap_tol", positive=True),
            max_iters=_integer(solver.get("max_iters", 500), "solver.max_iters", 0),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("solver", str(exc)) from exc

    quad = _object(doc.get("quadrature"), "quadrature")
    abs_tol = quad.get("abs_tol")
    quad_cfg = QuadratureConfig(
        abs_tol=None if abs_tol is None else _number(abs_tol, "quadrature.abs_tol", positive=True),
        rel_tol=_number(quad.get("rel_tol", 1e-8), "quadrature.rel_tol", positive=True),
        max_subdivisions=_integer(quad.get("max_subdivisions", 2 ** 16), "quadrature.max_subdivisions", 8),
    )

    tie_rule = doc.get("tie_rule", "equal")
    if tie_rule not in ("lowest", "equal"):
        raise ConfigError("tie_rule", "must be 'lowest' or 'equal'")

    layers = _object(doc.get("layers"), "layers")
    output = _object(doc.get("output"), "output")
    out_dir = output.get("dir", "out")
    if not isinstance(out_dir, str):
        raise ConfigError("output.dir", "must be a string")

    return MarketConfig(
        aggregate=aggregate,
        agents=agents,
        solver=opts,
        quadrature=quad_cfg,
        tie_rule=tie_rule,
        tie_tol=_number(layers.get("tie_tol", _layers.DEFAULT_TIE_TOL), "layers.tie_tol", positive=True),
        scan_grid=_integer(layers.get("scan_grid", _layers.DEFAULT_SCAN_GRID), "layers.scan_grid", 64),
        out_dir=out_dir,
        grid=_integer(output.get("grid", 1001), "output.grid", 2),
        truncation_mass=tm,
        raw=doc,
    )


def load_config(path, truncation_mass: float | None = None) -> MarketConfig:
    """Read and validate a config file; relative paths resolve next to it."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return parse_config(doc, path.parent, truncation_mass)


def initial_risks(cfg: MarketConfig) -> np.ndarray | None:
    """Initial ``rho_i(X_i)`` for precomputed or empirical-column inputs.

    Returns ``None`` for proportional shares, which the pipeline computes from
    ``cfg.theta``.
    """
    if cfg.initial_type == "precomputed":
        return np.array([a.rho_x for a in cfg.agents])
    if cfg.initial_type == "empirical_column":
        return np.array([coherent_risk(Empirical(a.samples), a.distortions, cfg.quadrature)[0]
                         for a in cfg.agents])
    return None
