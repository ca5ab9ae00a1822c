"""
Independent computations of ``g(i, tau)``.

``g`` solves the linear system ``dg/dtau = (Q - diag(delta)) g`` with
``g(., 0) = 1``, and has the Feynman-Kac form
``g(i, tau) = E[exp(-int_0^tau delta(Y_u) du) | Y_0 = i]``. This module
evaluates it three ways: fixed-step RK4, a Pade matrix exponential, and Monte
Carlo over exactly simulated regime paths.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .model import MarketModel, discount_generator, regime_scalars

DEFAULT_ODE_STEPS = 20_000
BLOCK_SIZE = 1 << 16  # paths per RNG stream


# ----------------------------------------------------------------------
# Deterministic oracles
# ----------------------------------------------------------------------
def rk4_integrate(f: Callable[[float, NDArray], NDArray], y0: NDArray, t_end: float, steps: int
                  ) -> NDArray:
    """Classical fourth-order Runge-Kutta with ``steps`` equal steps on ``[0, t_end]``."""
    h = t_end / steps
    y = np.array(y0, dtype=np.float64)
    t = 0.0
    for _ in range(steps):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def rk4_step_matrix(a: NDArray, h: float) -> NDArray:
    """One RK4 step for ``y' = a y`` as a matrix.

    The four stages are applied to the identity, which yields the propagator
    ``I + ha + (ha)^2/2 + (ha)^3/6 + (ha)^4/24`` of the method.
    """
    eye = np.eye(a.shape[0])
    k1 = a @ eye
    k2 = a @ (eye + h / 2 * k1)
    k3 = a @ (eye + h / 2 * k2)
    k4 = a @ (eye + h * k3)
    return eye + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def ode_g(model: MarketModel, tau: float, steps: int = DEFAULT_ODE_STEPS) -> NDArray[np.float64]:
    """``g(., tau)`` by RK4 with fixed step ``tau / steps``."""
    if tau < 0 or steps < 1:
        raise ValueError("need tau >= 0 and steps >= 1")
    a = discount_generator(model)
    step = rk4_step_matrix(a, tau / steps)
    y = np.ones(model.m)
    for _ in range(steps):
        y = step @ y
    return y


# Pade(6, 6) numerator coefficients; the denominator alternates signs.
_PADE6 = (1.0, 1 / 2, 5 / 44, 1 / 66, 1 / 792, 1 / 15840, 1 / 665280)


def expm(a: NDArray) -> NDArray:
    """Matrix exponential by scaling and squaring with a diagonal Pade(6) kernel.

    The matrix is scaled by ``2**-s`` until its infinity norm is at most 1/2,
    where the Pade(6, 6) truncation error is below double precision.
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    norm = np.linalg.norm(a, np.inf)
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    x = a / 2.0 ** s
    eye = np.eye(n)
    p = eye * _PADE6[0]
    qd = eye * _PADE6[0]
    power = eye
    for k in range(1, len(_PADE6)):
        power = power @ x
        p = p + _PADE6[k] * power
        qd = qd + (-1) ** k * _PADE6[k] * power
    r = np.linalg.solve(qd, p)
    for _ in range(s):
        r = r @ r
    return r


def matexp_g(model: MarketModel, tau: float) -> NDArray[np.float64]:
    """``g(., tau) = exp(tau (Q - diag(delta))) @ 1``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return expm(tau * discount_generator(model)) @ np.ones(model.m)


# ----------------------------------------------------------------------
# Regime chain simulation
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ChainPath:
    """One regime path on ``[0, horizon]``: ``states[k]`` holds on ``[jump_times[k-1], jump_times[k])``."""

    jump_times: NDArray[np.float64]
    states: NDArray[np.int64]
    horizon: float

    def segments(self) -> list[tuple[int, float, float]]:
        """``(state, start, end)`` holding intervals covering ``[0, horizon]``."""
        edges = np.concatenate([[0.0], self.jump_times, [self.horizon]])
        return [(int(s), float(edges[k]), float(edges[k + 1])) for k, s in enumerate(self.states)]

    def occupation(self, m: int) -> NDArray[np.float64]:
        occ = np.zeros(m)
        for s, a, b in self.segments():
            occ[s] += b - a
        return occ

    def state_at(self, t: float) -> int:
        return int(self.states[np.searchsorted(self.jump_times, t, side="right")])


def _jump_cdf(q: NDArray) -> NDArray:
    """Rows of cumulative successor probabilities ``q_ij / q_i`` (last entry exactly 1)."""
    off = q - np.diag(np.diag(q))
    tot = off.sum(axis=1, keepdims=True)
    cdf = np.cumsum(off, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cdf = np.where(tot > 0, cdf / np.where(tot > 0, tot, 1.0), 1.0)
    return cdf


def simulate_chain(model: MarketModel, i0: int, tau: float, rng: np.random.Generator) -> ChainPath:
    """Exact event-driven simulation of the regime chain started in ``i0``."""
    if not 0 <= i0 < model.m:
        raise IndexError(f"regime {i0} out of range for m = {model.m}")
    q = model.q
    exit_rates = -np.diag(q)
    cdf = _jump_cdf(q)
    t, s = 0.0, i0
    times, states = [], [i0]
    while True:
        if exit_rates[s] <= 0:
            break
        t += rng.exponential(1.0 / exit_rates[s])
        if t >= tau:
            break
        s = int(np.argmax(rng.random() < cdf[s]))
        times.append(t)
        states.append(s)
    return ChainPath(np.array(times, dtype=np.float64), np.array(states, dtype=np.int64), float(tau))


def _occupation_block(q: NDArray, i0: int, tau: float, n: int, rng: np.random.Generator
                      ) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """Occupation times ``(n, m)`` and jump counts ``(n,)`` for ``n`` independent paths."""
    m = q.shape[0]
    exit_rates = -np.diag(q)
    cdf = _jump_cdf(q)
    state = np.full(n, i0, dtype=np.int64)
    t = np.zeros(n)
    occ = np.zeros((n, m))
    jumps = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        s = state[active]
        rate = exit_rates[s]
        e = rng.standard_exponential(active.size)
        with np.errstate(divide="ignore"):
            t_next = t[active] + np.where(rate > 0, e / np.where(rate > 0, rate, 1.0), np.inf)
        end = np.minimum(t_next, tau)
        occ[active, s] += end - t[active]
        jumped = t_next < tau
        active = active[jumped]
        if not active.size:
            break
        t[active] = t_next[jumped]
        u = rng.random(active.size)
        state[active] = np.argmax(u[:, None] < cdf[s[jumped]], axis=1)
        jumps[active] += 1
    return occ, jumps


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for path block ``block``; independent of worker layout."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _blocks(n_paths: int) -> list[tuple[int, int]]:
    return [(b, min(BLOCK_SIZE, n_paths - b * BLOCK_SIZE))
            for b in range(-(-n_paths // BLOCK_SIZE))]


def map_blocks(fn: Callable[[int, int], tuple], n_paths: int, n_jobs: int | None = None) -> list[tuple]:
    """Run ``fn(block_index, block_size)`` over all path blocks, results in block order."""
    blocks = _blocks(n_paths)
    if n_jobs is None:
        n_jobs = os.cpu_count() or 1
    if n_jobs <= 1 or len(blocks) == 1:
        return [fn(b, size) for b, size in blocks]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda bs: fn(*bs), blocks))


def simulate_occupation(model: MarketModel, i0: int, tau: float, n_paths: int, seed: int,
                        n_jobs: int | None = None) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """Per-path time spent in each regime over ``[0, tau]``, plus jump counts."""
    if not 0 <= i0 < model.m:
        raise IndexError(f"regime {i0} out of range for m = {model.m}")
    q = np.array(model.q)

    def run(b: int, size: int):
        return _occupation_block(q, i0, tau, size, block_rng(seed, b))

    parts = map_blocks(run, n_paths, n_jobs)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


# ----------------------------------------------------------------------
# Monte Carlo
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class PathEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int

    @classmethod
    def from_samples(cls, samples: NDArray[np.float64], seed: int) -> PathEstimate:
        n = samples.size
        if n == 1:
            return cls(float(samples[0]), math.nan, 1, seed)
        if n and np.all(samples == samples[0]):
            return cls(float(samples[0]), 0.0, n, seed)
        return cls(float(np.mean(samples)), float(np.std(samples, ddof=1) / math.sqrt(n)), n, seed)

    def z_score(self, value: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == value else math.copysign(math.inf, self.mean - value)
        return (self.mean - value) / self.std_error

    def brackets(self, value: float, k: float = 3.0) -> bool:
        """``|mean - value| <= k * std_error``."""
        return abs(self.mean - value) <= k * self.std_error


def discount_functional(occupation: NDArray[np.float64], delta: NDArray[np.float64]) -> NDArray[np.float64]:
    """``exp(-int delta(Y_u) du)``; exact because ``delta`` is constant between jumps."""
    return np.exp(-(occupation @ delta))


def mc_g(model: MarketModel, i0: int, tau: float, n_paths: int, seed: int,
         n_jobs: int | None = None) -> PathEstimate:
    """Monte Carlo estimate of ``g(i0, tau)`` from its Feynman-Kac representation."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    occ, _ = simulate_occupation(model, i0, tau, n_paths, seed, n_jobs)
    return PathEstimate.from_samples(discount_functional(occ, regime_scalars(model).delta), seed)
