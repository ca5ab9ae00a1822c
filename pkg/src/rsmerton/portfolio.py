"""
Value function, optimal strategy and optimal-wealth simulation.

The value function factorises as ``V(x, t, i) = U(x) g(i, T - t)`` with
``U(x) = x**gamma / gamma``. The optimal strategy holds the constant fraction
``(mu_i - r_i) / ((1 - gamma) sigma_i**2)`` of wealth in the stock while the
chain is in regime ``i``, so optimal wealth is a geometric Brownian motion
between regime jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .laplace.transform import ExponentialSum, ValueSolution, solve_g
from .model import MarketModel, merton_fraction, regime_scalars, validate_model
from .oracles import (
    ChainPath,
    PathEstimate,
    _occupation_block,
    block_rng,
    discount_functional,
    map_blocks,
    simulate_chain,
)

__all__ = [
    "DomainError", "ValueSolution", "WealthPath", "TerminalSample", "solve_value",
    "utility", "value", "optimal_fraction", "optimal_holding", "merton_factor",
    "simulate_optimal_wealth", "simulate_terminal", "expected_utility_mc",
    "hjb_residual", "hjb_residual_fd", "perturbed", "admissibility_bound",
    "strategy_second_moment",
]


class DomainError(ValueError):
    pass


def solve_value(model: MarketModel, horizon: float, method: str = "auto") -> ValueSolution:
    """Solve for ``g`` and attach the horizon so the solution can price ``V(x, t, i)``."""
    if horizon < 0:
        raise DomainError("horizon must be non-negative")
    return solve_g(model, horizon=horizon, method=method)


def utility(x: ArrayLike, gamma: float):
    x = np.asarray(x, dtype=np.float64)
    if gamma < 0 and np.any(x == 0):
        raise DomainError("U(0) = -inf for gamma < 0")
    out = x ** gamma / gamma
    return out[()] if out.ndim == 0 else out


def value(sol: ValueSolution, x: ArrayLike, t: float, i: int):
    """``V(x, t, i) = x**gamma / gamma * g(i, T - t)``."""
    if sol.horizon is None:
        raise DomainError("solution has no horizon; use solve_value(model, T)")
    if not 0 <= t <= sol.horizon:
        raise DomainError(f"t = {t} outside [0, {sol.horizon}]")
    if np.any(np.asarray(x) < 0):
        raise DomainError("wealth must be non-negative")
    return utility(x, sol.model.gamma) * sol.g[i](sol.horizon - t)


def optimal_fraction(model: MarketModel, i: int) -> float:
    """Fraction of wealth held in the stock in regime ``i``; independent of wealth and time."""
    return float(merton_fraction(model)[i])


def optimal_holding(model: MarketModel, x: ArrayLike, t: float, i: int):
    """Feedback amount ``theta(x, t, i)`` invested in the stock (``t`` does not enter)."""
    return optimal_fraction(model, i) * np.asarray(x, dtype=np.float64)


def merton_factor(mu: float, sigma: float, r: float, gamma: float, tau: float) -> float:
    """``exp([gamma/(1-gamma) (mu-r)^2/(2 sigma^2) + gamma r] tau)``: the no-switching ``g``."""
    return math.exp((gamma / (1 - gamma) * (mu - r) ** 2 / (2 * sigma ** 2) + gamma * r) * tau)


# ----------------------------------------------------------------------
# Optimal wealth
# ----------------------------------------------------------------------
def _log_coefficients(model: MarketModel) -> tuple[NDArray, NDArray]:
    """Per-regime log-drift and log-volatility of optimal wealth."""
    a = 1.0 - model.gamma
    phi = regime_scalars(model).sharpe
    vol = phi / a
    drift = phi ** 2 / a + model.r - 0.5 * vol ** 2
    return drift, vol


@dataclass(frozen=True)
class WealthPath:
    times: NDArray[np.float64]
    wealth: NDArray[np.float64]
    regimes: NDArray[np.int64]
    terminal_utility: float
    chain: ChainPath


def simulate_optimal_wealth(model: MarketModel, x0: float, i0: int, T: float, n_steps: int,
                            rng: np.random.Generator) -> WealthPath:
    """One optimal-wealth path sampled on ``n_steps + 1`` equally spaced times.

    Each grid interval is cut at the chain's jump times and every piece gets
    its exact log-normal increment, so there is no discretisation error.
    """
    if x0 < 0:
        raise DomainError("initial wealth must be non-negative")
    chain = simulate_chain(model, i0, T, rng)
    drift, vol = _log_coefficients(model)
    times = np.linspace(0.0, T, n_steps + 1)
    cuts = np.union1d(times, chain.jump_times)
    log_x = 0.0
    log_at = {0.0: 0.0}
    for a, b in zip(cuts[:-1], cuts[1:]):
        s = chain.state_at(a)
        dt = b - a
        log_x += drift[s] * dt + vol[s] * math.sqrt(dt) * rng.standard_normal()
        log_at[b] = log_x
    log_path = np.array([log_at[t] for t in times])
    wealth = x0 * np.exp(log_path)
    regimes = np.array([chain.state_at(t) for t in times], dtype=np.int64)
    if x0 == 0 and model.gamma < 0:
        u_T = -math.inf
    else:
        u_T = float(utility(wealth[-1], model.gamma))
    return WealthPath(times, wealth, regimes, u_T, chain)


@dataclass(frozen=True)
class TerminalSample:
    """Per-path terminal quantities from a common set of chain paths."""

    wealth: NDArray[np.float64]
    utility: NDArray[np.float64]
    discount: NDArray[np.float64]  # exp(-int delta(Y_u) du) on the same chain paths
    seed: int


def simulate_terminal(model: MarketModel, x0: float, i0: int, T: float, n_paths: int,
                      seed: int, n_jobs: int | None = None) -> TerminalSample:
    """Terminal optimal wealth for ``n_paths`` paths, vectorised by blocks.

    Chain paths come from the same streams as :func:`rsmerton.oracles.mc_g`
    with the same seed, so the discount functional and the utility share
    their randomness. Given the regime occupation times, ``log X_T`` is
    exactly Gaussian, which is how it is drawn.
    """
    if x0 <= 0:
        raise DomainError("initial wealth must be positive")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    q = np.array(model.q)
    drift, vol = _log_coefficients(model)
    delta = regime_scalars(model).delta

    def run(b: int, size: int):
        rng = block_rng(seed, b)
        occ, _ = _occupation_block(q, i0, T, size, rng)
        z = rng.standard_normal(size)
        log_x = occ @ drift + np.sqrt(occ @ vol ** 2) * z
        return log_x, discount_functional(occ, delta)

    parts = map_blocks(run, n_paths, n_jobs)
    log_x = np.concatenate([p[0] for p in parts])
    wealth = x0 * np.exp(log_x)
    return TerminalSample(wealth, wealth ** model.gamma / model.gamma,
                          np.concatenate([p[1] for p in parts]), seed)


def expected_utility_mc(model: MarketModel, x0: float, i0: int, T: float, n_paths: int,
                        seed: int, n_jobs: int | None = None) -> PathEstimate:
    """Monte Carlo ``E[U(X*_T)]`` under the optimal strategy."""
    sample = simulate_terminal(model, x0, i0, T, n_paths, seed, n_jobs)
    return PathEstimate.from_samples(sample.utility, seed)


# ----------------------------------------------------------------------
# HJB residual
# ----------------------------------------------------------------------
def _grid(x: ArrayLike, t: ArrayLike, regimes, m: int):
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(xs <= 0):
        raise DomainError("HJB residual needs x > 0")
    return xs, ts, list(range(m)) if regimes is None else list(regimes)


def _hamiltonian_residual(model, v_all, v_t, v_x, v_xx, i):
    """``V_t + r x V_x + (QV)(i) - (mu-r)^2 V_x^2 / (2 sigma^2 V_xx)`` for regime ``i``."""
    q = model.q
    x = v_all.x
    coupling = sum(q[i, j] * (v_all.v[j] - v_all.v[i]) for j in range(model.m) if j != i)
    excess = model.mu[i] - model.r[i]
    return (v_t + model.r[i] * x * v_x + coupling
            - excess ** 2 * v_x ** 2 / (2 * model.sigma[i] ** 2 * v_xx))


@dataclass
class _Values:
    x: NDArray
    v: list[NDArray]


def hjb_residual(sol: ValueSolution, x: ArrayLike, t: ArrayLike, regimes=None) -> float:
    """Max relative residual of the HJB system for ``V = U(x) g(i, T - t)``.

    Derivatives are exact: ``V_x``, ``V_xx`` from the power utility and
    ``V_t = -U(x) dg/dtau`` term by term from the exponential sums. The
    terminal condition ``g(i, 0) = 1`` is checked too; the result is the
    larger of the two relative residuals over the ``x``-by-``t`` grid.
    """
    model = sol.model
    T = sol.horizon
    if T is None:
        raise DomainError("solution has no horizon")
    gamma = model.gamma
    xs, ts, regs = _grid(x, t, regimes, model.m)
    X, TT = np.meshgrid(xs, ts, indexing="ij")
    tau = T - TT
    u = X ** gamma / gamma
    v_all = _Values(X, [u * g(tau) for g in sol.g])
    worst = max(abs(float(g(0.0)) - 1.0) for g in sol.g)
    for i in regs:
        gi = sol.g[i](tau)
        v_t = -u * sol.g[i].derivative(tau)
        v_x = X ** (gamma - 1) * gi
        v_xx = (gamma - 1) * X ** (gamma - 2) * gi
        res = _hamiltonian_residual(model, v_all, v_t, v_x, v_xx, i)
        worst = max(worst, float(np.max(np.abs(res) / np.abs(v_all.v[i]))))
    return worst


def hjb_residual_fd(sol: ValueSolution, x: ArrayLike, t: ArrayLike, regimes=None,
                    hx: float = 1e-3, ht: float = 1e-4) -> float:
    """As :func:`hjb_residual` but with central finite differences of :func:`value`."""
    model = sol.model
    T = sol.horizon
    xs, ts, regs = _grid(x, t, regimes, model.m)
    worst = 0.0
    for xv in xs:
        for tv in ts:
            h = min(ht, T / 4)
            dx = hx * xv
            vals = _Values(xv, [value(sol, xv, tv, j) for j in range(model.m)])
            for i in regs:
                def v(s):
                    return value(sol, xv, s, i)
                # Second-order stencils; one-sided at the ends of [0, T].
                if tv - h >= 0 and tv + h <= T:
                    v_t = (v(tv + h) - v(tv - h)) / (2 * h)
                elif tv - h < 0:
                    v_t = (-3 * vals.v[i] + 4 * v(tv + h) - v(tv + 2 * h)) / (2 * h)
                else:
                    v_t = (3 * vals.v[i] - 4 * v(tv - h) + v(tv - 2 * h)) / (2 * h)
                vp, vm = value(sol, xv + dx, tv, i), value(sol, xv - dx, tv, i)
                v_x = (vp - vm) / (2 * dx)
                v_xx = (vp - 2 * vals.v[i] + vm) / dx ** 2
                res = _hamiltonian_residual(model, vals, v_t, v_x, v_xx, i)
                worst = max(worst, abs(float(res)) / abs(float(vals.v[i])))
    return worst


def perturbed(sol: ValueSolution, factor: float, regimes=None) -> ValueSolution:
    """Copy of ``sol`` with ``g(i, .)`` multiplied by ``factor`` for the chosen regimes."""
    regs = range(sol.m) if regimes is None else regimes
    g = tuple(
        ExponentialSum(gi.coeffs * factor, gi.powers, gi.rates, gi.regime) if k in regs else gi
        for k, gi in enumerate(sol.g)
    )
    return ValueSolution(g, sol.model, sol.horizon, dict(sol.diagnostics, perturbed=factor))


# ----------------------------------------------------------------------
# Admissibility
# ----------------------------------------------------------------------
def admissibility_bound(model: MarketModel, x: float, T: float) -> float:
    """Upper bound on ``E[int_0^T theta*_s^2 ds]`` for the optimal strategy.

    Conditionally on the chain, ``E[X_s^2] = x^2 exp(int (2r + 2 Phi^2/a + Phi^2/a^2) du)``
    with ``a = 1 - gamma``; bounding the rate and the squared fraction by their
    regime maxima and integrating in ``s`` gives ``max pi^2 x^2 (e^{cT} - 1)/c``.
    """
    validate_model(model, require_positive_exit=False)
    a = 1.0 - model.gamma
    phi = regime_scalars(model).sharpe
    c = float(np.max(2 * model.r + 2 * phi ** 2 / a + phi ** 2 / a ** 2))
    frac2 = float(np.max(merton_fraction(model) ** 2))
    growth = T if c == 0 else math.expm1(c * T) / c
    return frac2 * x ** 2 * growth


def strategy_second_moment(model: MarketModel, x0: float, i0: int, T: float, n_steps: int,
                           n_paths: int, seed: int) -> PathEstimate:
    """Monte Carlo ``E[sum theta*(t_k)^2 dt]`` on a left-point time grid."""
    rng = np.random.default_rng(seed)
    frac = merton_fraction(model)
    dt = T / n_steps
    samples = np.empty(n_paths)
    for k in range(n_paths):
        path = simulate_optimal_wealth(model, x0, i0, T, n_steps, rng)
        theta = frac[path.regimes[:-1]] * path.wealth[:-1]
        samples[k] = float(np.sum(theta ** 2) * dt)
    return PathEstimate.from_samples(samples, seed)
