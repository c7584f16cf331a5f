"""Acceptance criteria 1-8.

Each test prints one ``PASS``/``FAIL`` line (shown even under captured output)
and then asserts the same condition.
"""

import time

import numpy as np
import pytest
from scipy import integrate, stats

from conftest import T_HAT, T_HAT_1, T_HAT_2, T_HAT_3, example_sets
from riskshare.allocation import RetentionProfile, layer_structure, verify
from riskshare.choquet import choquet_integral, coherent_risk
from riskshare.distortion import DistortionSet, ExpectedShortfall, PowerTail, WangTransform, mix
from riskshare.distribution import Discrete, Gamma
from riskshare.oracle import (
    DiscreteInstance,
    InstanceTooLarge,
    brute_force_layer_allocations,
    brute_force_minmax,
    random_instance,
)
from riskshare.pipeline import solve_market
from riskshare.quadrature import QuadratureConfig, integrate as kronrod
from riskshare.solver import MinMaxProblem, SolverOptions, solve


@pytest.fixture
def announce(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        assert ok, detail
    return emit


def test_criterion_1_example_weights(announce):
    t0 = time.perf_counter()
    sol = solve(MinMaxProblem(Gamma(2.0, 10.0), example_sets()))
    elapsed = time.perf_counter() - t0
    w1, w2, w3 = sol.weights
    # agent 1 is the singleton {T1}; agents 2 and 3 mix (T, T2) and (T, T3)
    ok = (sol.converged
          and abs(w3[0] - 0.2269) <= 0.005
          and np.array_equal(w1, [1.0])
          and abs(w2[1] - 1.0) <= 1e-3
          and elapsed < 60)
    announce(1, "example weights", ok,
             f"agent 3 weight on T_hat {w3[0]:.6f} (target 0.2269 +- 0.005), "
             f"agent 2 weight on T_hat_2 {w2[1]:.6f}, agent 1 {w1.tolist()}, {elapsed:.2f} s")


def test_criterion_2_example_layers(announce, gamma, example_solution):
    t0 = time.perf_counter()
    layers = layer_structure(example_solution, gamma)
    elapsed = time.perf_counter() - t0
    bp = layers.breakpoints[1:-1] + layers.s_lower
    labels = [sorted(i + 1 for i in m) for m in layers.members]
    target = np.array([53.302, 68.164, 74.287])
    ok = (bp.size == 3 and np.all(np.abs(bp - target) <= 0.1)
          and labels == [[3], [2], [3], [1]] and elapsed < 10)
    announce(2, "example layers", ok,
             f"breakpoints {np.round(bp, 3).tolist()} labels {labels}, {elapsed:.2f} s")


def test_criterion_3_gamma_moments(announce):
    law = Gamma(2.0, 10.0)
    lo, hi = law.essential_bounds()
    cfg = QuadratureConfig(rel_tol=1e-10)
    mean = kronrod(lambda x: x * law.pdf(x), lo, hi, config=cfg)
    second = kronrod(lambda x: x * x * law.pdf(x), lo, hi, config=cfg)
    var = second - mean ** 2
    ok = abs(mean / 20 - 1) <= 1e-3 and abs(var / 200 - 1) <= 1e-3
    announce(3, "gamma moments", ok, f"mean {mean:.9f} variance {var:.9f}")


def test_criterion_4_es_cross_check(announce):
    law = Gamma(2.0, 10.0)
    ppf = stats.gamma(2.0, scale=10.0).ppf
    worst, parts = 0.0, []
    for alpha in (0.01, 0.025, 0.05):
        ours = choquet_integral(law, ExpectedShortfall(alpha))
        ref = integrate.quad(ppf, 1 - alpha, 1, limit=200, epsabs=0, epsrel=1e-12)[0] / alpha
        err = abs(ours / ref - 1)
        worst = max(worst, err)
        parts.append(f"alpha {alpha}: {ours:.9f} vs {ref:.9f}")
    announce(4, "ES cross-check", worst <= 1e-5, "; ".join(parts) + f"; worst relative {worst:.2e}")


def test_criterion_5_oracle(announce):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(20):
        inst = random_instance(rng)
        oracle_value, _, _ = brute_force_minmax(inst)
        problem = MinMaxProblem(inst.dist, inst.sets)
        for method in ("lp", "kelley"):
            value = solve(problem, SolverOptions(method=method)).value
            worst = max(worst, abs(value - oracle_value) / inst.scale)
    layer_worst, checked = 0.0, 0
    while checked < 20:
        inst = random_instance(rng, max_atoms=5, singleton=True)
        try:
            enum = brute_force_layer_allocations(inst, share_grid=5)
        except InstanceTooLarge:
            continue
        layer_worst = max(layer_worst, abs(enum.minimum - enum.closed_form))
        checked += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 2e-3 and layer_worst <= 1e-12 and elapsed < 60
    announce(5, "oracle equivalence", ok,
             f"worst |solver - grid| / scale {worst:.2e} over 20 instances x 2 methods, "
             f"worst layer gap {layer_worst:.1e} over {checked} instances, {elapsed:.2f} s")


def test_criterion_6_identical_sets(announce):
    rng = np.random.default_rng(6)
    shared_choices = [ExpectedShortfall(0.3), WangTransform(0.7), PowerTail(0.4, 0.5),
                      mix(DistortionSet((ExpectedShortfall(0.1), WangTransform(1.2))), [0.4, 0.6])]
    worst, count = 0.0, 0
    for T in shared_choices:
        for n in (2, 3):
            m = 4 if n == 2 else 3
            atoms = np.sort(rng.choice(np.arange(1, 30), size=m, replace=False)).astype(float)
            law = Discrete(atoms, rng.dirichlet(np.ones(m)))
            dset = DistortionSet((T,), check_concavity=False)
            enum = brute_force_layer_allocations(DiscreteInstance(law, (dset,) * n), share_grid=5)
            rho = choquet_integral(law, T)
            totals = enum.totals + law.essential_bounds()[0]
            worst = max(worst, float(np.max(np.abs(totals - rho))))
            count += totals.size
    announce(6, "identical sets", worst <= 1e-12,
             f"{count} layer allocations, worst |total - rho(S)| {worst:.1e}")


def _random_law(rng, m):
    atoms = np.sort(rng.uniform(-20, 60, size=m))
    return atoms, rng.dirichlet(np.ones(m))


def test_criterion_7_axioms(announce):
    rng = np.random.default_rng(7)
    sets = [DistortionSet((ExpectedShortfall(0.05),)),
            DistortionSet((WangTransform(0.9),)),
            DistortionSet((T_HAT, T_HAT_2)),
            DistortionSet((T_HAT_1, T_HAT_3))]
    worst = {"homogeneity": 0.0, "translation": 0.0, "monotonicity": 0.0, "comonotone": 0.0}

    def rel(a, b):
        return abs(a - b) / max(1.0, abs(a), abs(b))

    for _ in range(50):
        atoms, probs = _random_law(rng, int(rng.integers(1, 9)))
        law = Discrete(atoms, probs)
        lam, shift = rng.uniform(0.1, 5), rng.uniform(-10, 10)
        bump = rng.uniform(0, 5, size=atoms.size)
        for dset in sets:
            rho = coherent_risk(law, dset)[0]
            scaled = coherent_risk(Discrete(lam * atoms, probs), dset)[0]
            worst["homogeneity"] = max(worst["homogeneity"], rel(scaled, lam * rho))
            moved = coherent_risk(Discrete(atoms + shift, probs), dset)[0]
            worst["translation"] = max(worst["translation"], rel(moved, rho + shift))
            bigger = coherent_risk(Discrete.from_outcomes(atoms + bump, probs), dset)[0]
            # a violation is a decrease beyond roundoff
            worst["monotonicity"] = max(worst["monotonicity"],
                                        max(0.0, rho - bigger) / max(1.0, abs(rho)))
            if len(dset) == 1:
                steps = np.diff(atoms, prepend=0.0)
                u = rng.uniform(0, 1, size=atoms.size)
                f = np.cumsum(u * steps)
                parts = [coherent_risk(Discrete.from_outcomes(v, probs), dset)[0]
                         for v in (f, atoms - f)]
                worst["comonotone"] = max(worst["comonotone"], rel(sum(parts), rho))
    ok = all(v <= 1e-9 for v in worst.values())
    announce(7, "coherence axioms", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_8_pipeline(announce, example_market):
    res = example_market
    rep = res.verification
    total = float(np.sum(res.posterior_risks))
    target = res.solution.value + res.problem.lower_bound_s
    rel = abs(total / target - 1)
    prof = res.profile
    owner = int(np.argmax(prof.slopes[:, 0]))
    other = (owner + 1) % prof.slopes.shape[0]
    slopes = prof.slopes.copy()
    slopes[owner, 0] -= 0.5
    slopes[other, 0] += 0.5
    bad = RetentionProfile(prof.breakpoints, slopes, prof.s_lower, prof.c)
    bad_rep = verify(bad, res.problem, res.solution, res.layers, res.initial_risks)
    ok = (rel <= 1e-3 and all(rep.ir_flags) and rep.passed
          and bad_rep.optimality_residual > 0 and bad_rep.layer_violation > 0 and not bad_rep.passed)
    announce(8, "allocation verification", ok,
             f"total {total:.9f} vs optimum {target:.9f} (relative {rel:.1e}), IR {rep.ir_flags}, "
             f"corrupted residual {bad_rep.optimality_residual:.3e}, "
             f"layer violation {bad_rep.layer_violation:.2f}")
