"""
Command-line interface.

Subcommands
-----------
value         g(i, T - t) and V(x0, t, i) per risk aversion and regime
merton-limit  re-solve a two-regime market as the bull exit rate q1 shrinks
oracle-check  Laplace solution against RK4, matrix exponential and Monte Carlo
simulate      optimal-wealth Monte Carlo with an expected-utility closure report

Exit codes: 0 success, 1 invalid input, 2 numerical failure or tolerance
breach, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .laplace import DegenerateSystem, PartialFractionError, RootFindingFailure, solve_g
from .model import ModelValidationError, validate_model
from .oracles import PathEstimate, matexp_g, mc_g, ode_g
from .portfolio import merton_factor, simulate_terminal, solve_value, value

logger = logging.getLogger("rsmerton")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

ODE_RTOL = 1e-7
MATEXP_RTOL = 1e-8
MC_SIGMAS = 3.0


class ToleranceBreach(RuntimeError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.7f}"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)


# ----------------------------------------------------------------------
# Commands. Each takes a validated RunConfig and a text stream, returns an exit code.
# ----------------------------------------------------------------------
def cmd_value(cfg: RunConfig, out=sys.stdout) -> int:
    rows = []
    print(f"{'gamma':>7} {'regime':>6} {'tau':>8} {'g(i,T-t)':>14} {'V(x0,t,i)':>16}", file=out)
    for gamma in cfg.gamma:
        model = validate_model(cfg.model(gamma))
        sol = solve_value(model, cfg.T)
        for i in range(model.m):
            g = float(sol.g[i](cfg.tau))
            v = float(value(sol, cfg.x0, cfg.t, i))
            rows.append((float(gamma), i + 1, float(cfg.tau), g, v))
            print(f"{gamma:>7g} {i + 1:>6d} {cfg.tau:>8g} {_fmt(g):>14} {_fmt(v):>16}", file=out)
    _write(cfg.out, _csv_text(["gamma", "regime", "tau", "g", "value"], rows))
    return EXIT_OK


def cmd_merton_limit(cfg: RunConfig, out=sys.stdout) -> int:
    if cfg.m != 2:
        raise ConfigError("merton-limit needs a two-regime configuration")
    gamma = cfg.gamma[0]
    base = cfg.model(gamma)
    rows = []
    print(f"{'q1':>8} {'g(1,T-t)':>12} {'g(2,T-t)':>12}", file=out)
    for q1 in cfg.q1_list:
        q = np.array(base.q)
        q[0, 0], q[0, 1] = -q1, q1
        model = validate_model(base.replace(q=q), require_positive_exit=q1 > 0)
        g = solve_g(model).values(cfg.tau)
        rows.append((float(q1), float(g[0]), float(g[1])))
        print(f"{q1:>8g} {_fmt(g[0]):>12} {_fmt(g[1]):>12}", file=out)
    merton = merton_factor(base.mu[0], base.sigma[0], base.r[0], gamma, cfg.tau)
    gap = merton - rows[-1][1]
    print(f"Merton factor (regime 1 parameters): {_fmt(merton)}", file=out)
    print(f"gap to last row: {gap:.3e}", file=out)
    _write(cfg.out, _csv_text(["q1", "g1", "g2"], rows))
    return EXIT_OK


def cmd_oracle_check(cfg: RunConfig, out=sys.stdout, n_jobs: int | None = None) -> int:
    rows = []
    ok = True
    print(f"{'gamma':>6} {'i':>2} {'laplace':>14} {'ode':>14} {'matexp':>14} {'mc':>14} "
          f"{'mc_se':>10} {'rel_ode':>9} {'rel_exp':>9} {'z_mc':>7}  status", file=out)
    for gamma in cfg.gamma:
        model = validate_model(cfg.model(gamma))
        lap = solve_g(model).values(cfg.tau)
        ode = ode_g(model, cfg.tau, cfg.steps)
        mex = matexp_g(model, cfg.tau)
        for i in range(model.m):
            est = mc_g(model, i, cfg.tau, cfg.n_paths, cfg.seed + i, n_jobs)
            rel_ode = abs(lap[i] - ode[i]) / abs(ode[i])
            rel_exp = abs(lap[i] - mex[i]) / abs(mex[i])
            if est.std_error == 0:
                mc_ok = abs(est.mean - lap[i]) <= 1e-12 * abs(lap[i])
                z = 0.0 if mc_ok else math.inf
            else:
                z = est.z_score(lap[i])
                mc_ok = abs(z) <= MC_SIGMAS
            passed = rel_ode <= ODE_RTOL and rel_exp <= MATEXP_RTOL and mc_ok
            ok &= passed
            rows.append((float(gamma), i + 1, float(lap[i]), float(ode[i]), float(mex[i]),
                         est.mean, est.std_error, float(rel_ode), float(rel_exp), float(z),
                         "pass" if passed else "FAIL"))
            print(f"{gamma:>6g} {i + 1:>2d} {_fmt(lap[i]):>14} {_fmt(ode[i]):>14} "
                  f"{_fmt(mex[i]):>14} {_fmt(est.mean):>14} {est.std_error:>10.2e} "
                  f"{rel_ode:>9.1e} {rel_exp:>9.1e} {z:>7.2f}  {'pass' if passed else 'FAIL'}",
                  file=out)
    _write(cfg.out, _csv_text(
        ["gamma", "regime", "laplace", "ode", "matexp", "mc_mean", "mc_se",
         "rel_gap_ode", "rel_gap_matexp", "z_mc", "status"], rows))
    if not ok:
        raise ToleranceBreach("oracle tolerances breached")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out=sys.stdout, n_jobs: int | None = None) -> int:
    if cfg.x0 <= 0:
        raise ConfigError("simulate needs x0 > 0")
    gamma = cfg.gamma[0]
    model = validate_model(cfg.model(gamma))
    i0 = cfg.i0 - 1
    sample = simulate_terminal(model, cfg.x0, i0, cfg.tau, cfg.n_paths, cfg.seed, n_jobs)
    est = PathEstimate.from_samples(sample.utility, cfg.seed)
    v = float(value(solve_value(model, cfg.T), cfg.x0, cfg.t, i0))
    z = est.z_score(v) if est.n_paths > 1 else math.nan
    summary = [
        ("gamma", gamma), ("x0", cfg.x0), ("regime", cfg.i0), ("tau", cfg.tau),
        ("n_paths", est.n_paths), ("seed", cfg.seed), ("mc_mean", est.mean),
        ("mc_se", est.std_error), ("laplace_value", v), ("z", z),
    ]
    for k, val in summary:
        print(f"{k:>14}: {val}", file=out)
    if cfg.out:
        rows = [(k + 1, float(w), float(u), float(d))
                for k, (w, u, d) in enumerate(zip(sample.wealth, sample.utility, sample.discount))]
        _write(cfg.out, _csv_text(["path", "terminal_wealth", "terminal_utility", "discount"], rows))
        summary_path = Path(cfg.out).with_suffix(".summary.csv")
        _write(str(summary_path), _csv_text(["key", "value"], [
            (k, float(val) if isinstance(val, float) else val) for k, val in summary]))
    return EXIT_OK


COMMANDS = {
    "value": cmd_value,
    "merton-limit": cmd_merton_limit,
    "oracle-check": cmd_oracle_check,
    "simulate": cmd_simulate,
}


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace("[", "").replace("]", "").split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsmerton",
        description="Optimal CRRA investment in a regime-switching market.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="config file, or name of a bundled one")
        p.add_argument("--gamma", type=_float_list, help="comma-separated risk-aversion values")
        p.add_argument("--tau", type=float, help="time to horizon; sets t = 0, T = tau")
        p.add_argument("--x0", type=float, help="initial wealth")
        p.add_argument("--paths", type=int, help="Monte Carlo path count")
        p.add_argument("--seed", type=int)
        p.add_argument("--steps", type=int, help="RK4 step count")
        p.add_argument("--out", help="CSV output path")
        if name == "merton-limit":
            p.add_argument("--q1", type=_float_list, help="comma-separated bull exit rates")
        if name == "simulate":
            p.add_argument("--regime", type=int, help="initial regime (1-based)")
        if name in ("oracle-check", "simulate"):
            p.add_argument("--jobs", type=int, default=None, help="worker threads for Monte Carlo")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    over = dict(gamma=args.gamma, x0=args.x0, n_paths=args.paths, seed=args.seed,
                steps=args.steps, out=args.out,
                q1_list=getattr(args, "q1", None), i0=getattr(args, "regime", None))
    if args.tau is not None:
        over.update(T=args.tau, t=0.0)
    return cfg.with_overrides(**over).validate()


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        fn = COMMANDS[args.command]
        if args.command in ("oracle-check", "simulate"):
            return fn(cfg, sys.stdout, n_jobs=args.jobs)
        return fn(cfg, sys.stdout)
    except (ConfigError, ModelValidationError) as exc:
        logger.error("%s", exc)
        return EXIT_INVALID
    except (RootFindingFailure, DegenerateSystem, PartialFractionError, ToleranceBreach) as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
