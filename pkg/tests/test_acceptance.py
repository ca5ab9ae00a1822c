"""
Acceptance gate: one test per criterion, each recording a pass/fail line.

The lines are printed in pytest's terminal summary (see ``conftest.py``) and
also when this file is run directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from rsmerton import presets
from rsmerton.cli import main as cli_main
from rsmerton.laplace import build_system, solve_g, solve_transform, two_state_coefficients
from rsmerton.model import discount_generator, regime_scalars
from rsmerton.oracles import matexp_g, mc_g, ode_g
from rsmerton.portfolio import expected_utility_mc, hjb_residual, merton_factor, perturbed, solve_value, value

from conftest import MERTON_PRINTED, TWO_STATE_VALUES, Q1_LIMIT_VALUES, THREE_STATE_VALUES, printed_match, random_model, random_models

T = presets.HORIZON
GAMMAS = (0.1, 0.3, 0.5, 0.9)
TAUS = (0.1, 0.25, 0.5, 1.0)
RESULTS: dict[int, str] = {}


def report(n: int, title: str, ok: bool, detail: str) -> None:
    RESULTS[n] = f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


def named_models():
    return [presets.two_state(g) for g in GAMMAS] + [presets.three_state(g) for g in GAMMAS]


def test_criterion_1_two_regime_values():
    start = time.perf_counter()
    misses = []
    for gamma in GAMMAS:
        g = solve_g(presets.two_state(gamma)).values(T)
        misses += [(gamma, i + 1, g[i]) for i in range(2) if not printed_match(g[i], TWO_STATE_VALUES[gamma][i])]
    elapsed = time.perf_counter() - start
    report(1, "Two-regime reference values", not misses and elapsed < 1.0,
           f"{8 - len(misses)}/8 printed values match, {elapsed:.3f}s (limit 1s)")


def test_criterion_2_merton_limit():
    start = time.perf_counter()
    base = presets.two_state(0.1)
    misses, last = [], None
    for q1, printed in Q1_LIMIT_VALUES.items():
        g = solve_g(presets.two_state(0.1, q1=q1)).values(T)
        misses += [(q1, i + 1) for i in range(2) if not printed_match(g[i], printed[i])]
        last = g[0]
    merton = merton_factor(base.mu[0], base.sigma[0], base.r[0], 0.1, T)
    gap = merton - last
    elapsed = time.perf_counter() - start
    ok = not misses and printed_match(merton, MERTON_PRINTED) and 0 < gap <= 3e-6 and elapsed < 1.0
    report(2, "Vanishing bull exit rate", ok,
           f"{10 - len(misses)}/10 printed values match, Merton gap {gap:.2e} (limit 3e-6), "
           f"{elapsed:.3f}s (limit 1s)")


def test_criterion_3_three_regime_values():
    start = time.perf_counter()
    misses = []
    for gamma in GAMMAS:
        g = solve_g(presets.three_state(gamma)).values(T)
        misses += [(gamma, i + 1) for i in range(3) if not printed_match(g[i], THREE_STATE_VALUES[gamma][i])]
    elapsed = time.perf_counter() - start
    report(3, "Three-regime reference values", not misses and elapsed < 1.0,
           f"{12 - len(misses)}/12 printed values match, {elapsed:.3f}s (limit 1s)")


def test_criterion_4_oracle_equivalence():
    start = time.perf_counter()
    models = named_models() + random_models(100, seed=4)
    worst_exp = worst_ode = 0.0
    for model in models:
        sol = solve_g(model)
        for tau in TAUS:
            lap = sol.values(tau)
            mex, ode = matexp_g(model, tau), ode_g(model, tau, 20_000)
            worst_exp = max(worst_exp, float(np.max(np.abs(lap - mex) / np.abs(mex))))
            worst_ode = max(worst_ode, float(np.max(np.abs(lap - ode) / np.abs(ode))))
    elapsed = time.perf_counter() - start
    ok = worst_exp <= 1e-8 and worst_ode <= 1e-7 and elapsed < 30.0
    report(4, "Oracle equivalence", ok,
           f"{len(models)} models x {len(TAUS)} horizons, max rel gap matexp {worst_exp:.1e} (limit 1e-8), "
           f"ode {worst_ode:.1e} (limit 1e-7), {elapsed:.1f}s (limit 30s)")


def test_criterion_5_monte_carlo():
    start = time.perf_counter()
    zs = []
    for model in (presets.two_state(0.1), presets.three_state(0.1)):
        lap = solve_g(model).values(T)
        for i in range(model.m):
            zs.append(mc_g(model, i, T, 1_000_000, seed=100 + i).z_score(lap[i]))
    elapsed = time.perf_counter() - start
    worst = max(abs(z) for z in zs)
    report(5, "Monte Carlo consistency", worst <= 3.0 and elapsed < 60.0,
           f"{len(zs)} starts at 1e6 paths, max |z| {worst:.2f} (limit 3), {elapsed:.1f}s (limit 60s)")


def test_criterion_6_closure():
    start = time.perf_counter()
    zs = []
    for gamma in (0.1, 0.5):
        model = presets.two_state(gamma)
        sol = solve_value(model, T)
        for i in range(2):
            est = expected_utility_mc(model, 1.0, i, T, 1_000_000, seed=200 + i)
            zs.append(est.z_score(value(sol, 1.0, 0.0, i)))
    elapsed = time.perf_counter() - start
    worst = max(abs(z) for z in zs)
    report(6, "Expected-utility closure", worst <= 3.0 and elapsed < 120.0,
           f"gamma in (0.1, 0.5), both regimes, max |z| {worst:.2f} (limit 3), {elapsed:.1f}s (limit 120s)")


def test_criterion_7_hjb():
    xs, ts = np.linspace(0.5, 2.0, 20), np.linspace(0.0, 0.45, 20)
    models = named_models() + [presets.single_state(0.1)] + random_models(30, seed=7)
    worst = 0.0
    for model in models:
        worst = max(worst, hjb_residual(solve_value(model, T), xs, ts))
    sol = solve_value(presets.two_state(0.1), T)
    control = min(hjb_residual(perturbed(sol, 1.01), xs, ts),
                  hjb_residual(perturbed(sol, 1.01, regimes=[1]), xs, ts))
    report(7, "HJB residual", worst <= 1e-8 and control > 1e-3,
           f"{len(models)} models, max residual {worst:.1e} (limit 1e-8), "
           f"perturbed control {control:.1e} (needs > 1e-3)")


def _renewal_gap(model, sol) -> float:
    d, q = regime_scalars(model).delta, model.q
    worst = 0.0
    for tau in (0.25, 0.5):
        for i in range(model.m):
            k = d[i] - q[i, i]
            rhs = math.exp(-k * tau)
            for j in range(model.m):
                if j != i and q[i, j] > 0:
                    integral, _ = quad(lambda s: math.exp(-k * s) * sol.g[j](tau - s), 0.0, tau,
                                       epsabs=0.0, epsrel=1e-13, limit=200)
                    rhs += q[i, j] * integral
            worst = max(worst, abs(sol.g[i](tau) - rhs) / abs(rhs))
    return worst


def _pole_gap(sol, model) -> float:
    poles = [p for p, n in zip(sol.diagnostics["poles"], sol.diagnostics["multiplicities"])
             for _ in range(n)]
    eig = list(np.linalg.eigvals(discount_generator(model)))
    worst = 0.0
    for z in poles:
        k = min(range(len(eig)), key=lambda k: abs(eig[k] - z))
        worst = max(worst, abs(eig.pop(k) - z) / max(1.0, abs(z)))
    return worst


def test_criterion_8_structure():
    models = named_models() + random_models(50, seed=8)
    failures = []
    pole_gap = renewal_gap = terminal_gap = fast_gap = 0.0
    for k, model in enumerate(models):
        rfs = solve_transform(build_system(model))
        if any(rf.den != rfs[0].den or rf.num.degree >= rf.den.degree for rf in rfs):
            failures.append("properness/shared denominator")
        sol = solve_g(model, method="general")
        pole_gap = max(pole_gap, _pole_gap(sol, model))
        terminal_gap = max(terminal_gap, float(np.max(np.abs(sol.values(0.0) - 1.0))))
        if not all(np.all(sol.values(tau) > 0) for tau in np.linspace(0.0, T, 101)):
            failures.append("positivity")
        if k < 20:
            renewal_gap = max(renewal_gap, _renewal_gap(model, sol))
    rng = np.random.default_rng(88)
    min_disc = math.inf
    for _ in range(1000):
        model = random_model(rng, 2)
        min_disc = min(min_disc, two_state_coefficients(model).discriminant)
        fast, general = solve_g(model, method="two_state"), solve_g(model, method="general")
        for tau in (0.1, 0.5):
            fast_gap = max(fast_gap, float(np.max(np.abs(fast.values(tau) - general.values(tau))
                                                  / np.abs(general.values(tau)))))
    ok = (not failures and pole_gap <= 1e-8 and terminal_gap <= 1e-10 and renewal_gap <= 1e-7
          and min_disc > 0 and fast_gap <= 1e-10)
    report(8, "Structural invariants", ok,
           f"poles vs eigenvalues {pole_gap:.1e}, g(i,0) gap {terminal_gap:.1e}, renewal {renewal_gap:.1e}, "
           f"min discriminant {min_disc:.2e} over 1000 models, fast vs general {fast_gap:.1e}"
           + (f", failed: {sorted(set(failures))}" if failures else ""))


def test_criterion_9_determinism(tmp_path):
    runs = [
        ["value", "--config", "three_state"],
        ["merton-limit", "--config", "two_state"],
        ["oracle-check", "--config", "two_state", "--paths", "20000"],
        ["simulate", "--config", "two_state", "--paths", "100000", "--seed", "42"],
    ]
    mismatched = []
    for argv in runs:
        outputs = []
        for rep in range(2):
            out = tmp_path / f"{argv[0]}-{rep}.csv"
            code = cli_main(argv + ["--out", str(out)])
            extra = out.with_suffix(".summary.csv")
            outputs.append((code, out.read_bytes(), extra.read_bytes() if extra.exists() else b""))
        if outputs[0] != outputs[1] or outputs[0][0] != 0:
            mismatched.append(argv[0])
    report(9, "Determinism", not mismatched,
           f"{len(runs) - len(mismatched)}/{len(runs)} commands give byte-identical CSVs across runs")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
