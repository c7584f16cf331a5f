"""Run reports and plot-data files.

All floats are written with 12 significant digits so that an identical
config yields a byte-identical ``report.json``. Wall-clock timings go to a
separate ``timings.json``.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .pipeline import MarketResult

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "fmt",
    "clean",
    "build_report",
    "dumps",
    "report_schema",
    "curve_table",
    "density_table",
    "write_csv",
]

REPORT_SCHEMA_VERSION = 1
STATUS_VERIFIED = "verified"
STATUS_RESIDUAL = "verification_failed"
STATUS_NOT_CONVERGED = "not_converged"


def fmt(x: float) -> float:
    """Round to 12 significant digits."""
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("non-finite value in report")
    return float(f"{x:.12g}") + 0.0


def clean(obj):
    """Plain JSON types with floats rounded by :func:`fmt`."""
    if isinstance(obj, dict):
        return {k: clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    return obj


def status_of(result: MarketResult) -> str:
    if not result.solution.converged:
        return STATUS_NOT_CONVERGED
    return STATUS_VERIFIED if result.verification.passed else STATUS_RESIDUAL


def build_report(result: MarketResult, labels, aggregate_spec: dict, settings: dict) -> dict:
    """Plain-data report; see ``docs/report_schema.md``."""
    sol = result.solution
    lo, hi = result.problem.dist.essential_bounds()
    initial = result.initial_risks
    posterior = result.posterior_risks
    agents = []
    for i, label in enumerate(labels):
        agents.append({
            "index": i,
            "label": label,
            "weights": list(sol.weights[i]),
            "rho_initial": initial[i],
            "rho_retained": result.retained_risks[i],
            "side_payment": result.side_payments[i],
            "rho_final": posterior[i],
            "gain": initial[i] - posterior[i],
            "individually_rational": result.verification.ir_flags[i],
        })
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "status": status_of(result),
        "aggregate": {"spec": aggregate_spec, "s_lower": lo, "s_upper": hi},
        "settings": settings,
        "solver": {
            "value": sol.value,
            "upper_bound": sol.upper_bound,
            "final_gap": sol.final_gap,
            "iterations": sol.iterations,
            "converged": sol.converged,
        },
        "layers": {
            "breakpoints": [lo + b for b in result.layers.breakpoints],
            "excess_breakpoints": list(result.layers.breakpoints),
            "members": [sorted(m) for m in result.layers.members],
        },
        "agents": agents,
        "totals": {
            "rho_initial": float(np.sum(initial)),
            "rho_final": float(np.sum(posterior)),
            "optimal": sol.value + lo,
            "welfare_gain": result.welfare_gain,
            "side_payments": float(np.sum(result.side_payments)),
        },
        "verification": {**result.verification.to_dict(), "threshold": result.verification.rel_tol},
    }
    return clean(report)


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def report_schema() -> dict:
    """JSON Schema of ``report.json``."""
    text = resources.files("riskshare").joinpath("data/report.schema.json").read_text("utf-8")
    return json.loads(text)


def curve_table(result: MarketResult, grid: int) -> tuple[list[str], np.ndarray]:
    """Columns ``x, survival, tstar_<i>..., g_<i>..., sum_g_minus_x``.

    ``x`` runs over ``grid`` points of ``[s_lower, s_upper]``; ``g_i`` is
    evaluated at the excess ``x - s_lower``.
    """
    if grid < 2:
        raise ValueError("grid needs at least 2 points")
    dist = result.problem.dist
    lo, hi = dist.essential_bounds()
    x = np.linspace(lo, hi, grid)
    surv = np.atleast_1d(dist.survival(x))
    n = result.profile.n_agents
    tstar = np.vstack([np.atleast_1d(T(surv)) for T in result.solution.optimal_distortions])
    g = result.profile.values(x - lo)
    resid = g.sum(axis=0) - (x - lo)
    cols = (["x", "survival"] + [f"tstar_{i + 1}" for i in range(n)]
            + [f"g_{i + 1}" for i in range(n)] + ["sum_g_minus_x"])
    return cols, np.column_stack([x, surv, tstar.T, g.T, resid])


def density_table(dist, grid: int) -> tuple[list[str], np.ndarray]:
    """``x, density`` for continuous laws; ``x, probability`` for atomic ones."""
    if getattr(dist, "is_discrete", False):
        return ["x", "probability"], np.column_stack([dist.atoms, dist.probs])
    lo, hi = dist.essential_bounds()
    x = np.linspace(lo, hi, grid)
    return ["x", "density"], np.column_stack([x, np.atleast_1d(dist.pdf(x))])


def write_csv(path: Path, columns: list[str], rows: np.ndarray) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([f"{v:.12g}" for v in row])
