"""Command-line front end.

    riskshare solve  <config> [--out-dir DIR] [...]
    riskshare curves <config> [--out-dir DIR] [...]
    riskshare oracle [<config>] [--atoms M] [--instances N] [--seed S]

Exit codes: 0 verified, 1 error, 2 verification residual above threshold,
3 solver did not converge (the report is still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .allocation import InfeasibleError
from .config import ConfigError, MarketConfig, initial_risks, load_config
from .distribution import Discrete
from .oracle import DiscreteInstance, InstanceTooLarge, brute_force_minmax, random_instance
from .pipeline import MarketResult, solve_market
from .quadrature import QuadratureError
from .report import build_report, clean, curve_table, density_table, dumps, fmt, write_csv
from .solver import MinMaxProblem, SolverOptions, solve

log = logging.getLogger("riskshare")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_RESIDUAL = 2
EXIT_NOT_CONVERGED = 3

ORACLE_TOL = 2e-3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out-dir", help="output directory (default: config output.dir)")
    p.add_argument("--gap-tol", type=float, help="relative solver gap tolerance")
    p.add_argument("--max-iters", type=int, help="solver iteration limit")
    p.add_argument("--abs-tol", type=float, help="quadrature absolute tolerance")
    p.add_argument("--rel-tol", type=float, help="quadrature relative tolerance")
    p.add_argument("--tie-rule", choices=["lowest", "equal"], help="split of tied layers")
    p.add_argument("--grid", type=int, help="number of points in curve and density files")
    p.add_argument("--truncation-mass", type=float, help="tail mass cut from unbounded laws")
    p.add_argument("--verify-tol", type=float, default=1e-3,
                   help="relative optimality residual above which exit code is 2 (default 1e-3)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskshare",
        description="Comonotone Pareto-optimal risk sharing under coherent distortion risk measures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="solve a market and write report, curves and density")
    p.add_argument("config")
    _common(p)
    p = sub.add_parser("curves", help="write curve and density data only")
    p.add_argument("config")
    _common(p)
    p = sub.add_parser("oracle", help="compare the solver with brute-force enumeration")
    p.add_argument("config", nargs="?")
    _common(p)
    p.add_argument("--atoms", type=int, default=8, help="atoms used to discretize a continuous law")
    p.add_argument("--instances", type=int, default=1, help="random instances when no config is given")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight-step", type=float, default=1e-3, help="weight grid step")
    return parser


def _apply_overrides(cfg: MarketConfig, args) -> MarketConfig:
    solver = cfg.solver
    if args.gap_tol is not None or args.max_iters is not None:
        solver = SolverOptions(
            gap_tol=solver.gap_tol if args.gap_tol is None else args.gap_tol,
            max_iters=solver.max_iters if args.max_iters is None else args.max_iters,
        )
    quad = cfg.quadrature
    if args.abs_tol is not None or args.rel_tol is not None:
        quad = dataclasses.replace(
            quad,
            abs_tol=quad.abs_tol if args.abs_tol is None else args.abs_tol,
            rel_tol=quad.rel_tol if args.rel_tol is None else args.rel_tol,
        )
    return dataclasses.replace(
        cfg,
        solver=solver,
        quadrature=quad,
        tie_rule=args.tie_rule or cfg.tie_rule,
        grid=cfg.grid if args.grid is None else args.grid,
        out_dir=args.out_dir or cfg.out_dir,
    )


def _settings(cfg: MarketConfig, verify_tol: float) -> dict:
    return {
        "gap_tol": cfg.solver.gap_tol,
        "max_iters": cfg.solver.max_iters,
        "abs_tol": cfg.quadrature.abs_tol,
        "rel_tol": cfg.quadrature.rel_tol,
        "tie_rule": cfg.tie_rule,
        "tie_tol": cfg.tie_tol,
        "scan_grid": cfg.scan_grid,
        "grid": cfg.grid,
        "truncation_mass": cfg.truncation_mass,
        "verify_tol": verify_tol,
    }


def run_market(cfg: MarketConfig, verify_tol: float = 1e-3) -> MarketResult:
    return solve_market(
        cfg.aggregate, cfg.sets,
        initial_risks=initial_risks(cfg),
        initial_shares=cfg.theta,
        tie_rule=cfg.tie_rule,
        solver_options=cfg.solver,
        quad=cfg.quadrature,
        tie_tol=cfg.tie_tol,
        scan_grid=cfg.scan_grid,
        verify_tol=verify_tol,
    )


def _write_data(result: MarketResult, cfg: MarketConfig, out: Path) -> None:
    write_csv(out / "curves.csv", *curve_table(result, cfg.grid))
    write_csv(out / "density.csv", *density_table(cfg.aggregate, cfg.grid))


def _load(args) -> MarketConfig:
    cfg = load_config(args.config, args.truncation_mass)
    return _apply_overrides(cfg, args)


def cmd_solve(args, data_only: bool = False) -> int:
    cfg = _load(args)
    if cfg.grid < 2:
        raise ConfigError("grid", "must be at least 2")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = run_market(cfg, args.verify_tol)
    t1 = time.perf_counter()
    _write_data(result, cfg, out)
    t2 = time.perf_counter()
    if not data_only:
        report = build_report(result, cfg.labels, cfg.raw.get("aggregate", {}),
                              _settings(cfg, args.verify_tol))
        (out / "report.json").write_text(dumps(report), encoding="utf-8")
        timings = {"solve_seconds": t1 - t0, "write_seconds": t2 - t1,
                   "iterations": result.solution.iterations}
        (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n", encoding="utf-8")
    rep = result.verification
    log.info("value %.12g, relative residual %.3g, converged %s",
             result.solution.value, rep.optimality_residual / rep.scale, result.solution.converged)
    if not result.solution.converged:
        return EXIT_NOT_CONVERGED
    if data_only:
        return EXIT_OK
    return EXIT_OK if rep.passed else EXIT_RESIDUAL


def discretize(dist, atoms: int) -> Discrete:
    """Equal-weight atoms at the mid-quantiles ``(j + 1/2) / m``."""
    if getattr(dist, "is_discrete", False):
        return Discrete(dist.atoms, dist.probs)
    if atoms < 2:
        raise ValueError("need at least 2 atoms")
    q = np.atleast_1d(dist.quantile((np.arange(atoms) + 0.5) / atoms))
    values, counts = np.unique(q, return_counts=True)
    return Discrete(values, counts / atoms)


def oracle_gap(inst: DiscreteInstance, opts: SolverOptions = SolverOptions()) -> dict:
    """Solver value against the brute-force grid maximum on one instance."""
    oracle_value, oracle_weights, step = brute_force_minmax(inst)
    sol = solve(MinMaxProblem(inst.dist, inst.sets), opts)
    gap = abs(sol.value - oracle_value)
    return {
        "n_atoms": int(inst.dist.atoms.size),
        "n_agents": len(inst.sets),
        "scale": inst.scale,
        "grid_step": step,
        "solver_value": sol.value,
        "oracle_value": oracle_value,
        "gap": gap,
        "relative_gap": gap / inst.scale,
        "passed": bool(gap <= ORACLE_TOL * inst.scale),
        "solver_weights": [list(w) for w in sol.weights],
        "oracle_weights": [list(w) for w in oracle_weights],
    }


def cmd_oracle(args) -> int:
    if args.config is not None:
        cfg = _load(args)
        dist = discretize(cfg.aggregate, args.atoms)
        instances = [DiscreteInstance(dist, tuple(cfg.sets), args.weight_step)]
        opts = cfg.solver
        out = Path(cfg.out_dir)
    else:
        rng = np.random.default_rng(args.seed)
        instances = [random_instance(rng, weight_grid_step=args.weight_step)
                     for _ in range(args.instances)]
        opts = SolverOptions(gap_tol=args.gap_tol or 1e-6,
                             max_iters=500 if args.max_iters is None else args.max_iters)
        out = Path(args.out_dir or "out")
    rows = [oracle_gap(inst, opts) for inst in instances]
    passed = all(r["passed"] for r in rows)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"tolerance": ORACLE_TOL, "passed": passed, "instances": rows}
    (out / "oracle.json").write_text(dumps(clean(doc)), encoding="utf-8")
    for i, r in enumerate(rows):
        print(f"instance {i}: solver {fmt(r['solver_value'])} oracle {fmt(r['oracle_value'])} "
              f"gap/scale {r['relative_gap']:.3g} {'PASS' if r['passed'] else 'FAIL'}")
    return EXIT_OK if passed else EXIT_RESIDUAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "curves":
            return cmd_solve(args, data_only=True)
        return cmd_oracle(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
    except InstanceTooLarge as exc:
        print(f"instance too large: {exc}", file=sys.stderr)
    except (QuadratureError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
