"""
Problem instance for CRRA utility maximisation in a regime-switching market.

A market has ``m`` regimes driven by a continuous-time Markov chain with
generator ``Q``. In regime ``i`` the bond earns ``r[i]`` and the stock has
drift ``mu[i]`` and volatility ``sigma[i]``. The investor has power utility
``U(x) = x**gamma / gamma`` with ``gamma < 1``, ``gamma != 0``.

Regimes are indexed from 0 throughout the library.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

ROW_SUM_ATOL = 1e-12


def _frozen(values: ArrayLike) -> NDArray[np.float64]:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Transition-rate matrix of the regime chain.

    Parameters
    ----------
    q : (m, m) array
        ``q[i, j]`` is the jump rate from regime ``i`` to ``j`` (per unit time).
    """

    q: NDArray[np.float64]

    def __post_init__(self) -> None:
        q = np.array(self.q, dtype=np.float64)
        if q.ndim == 0:
            q = q.reshape(1, 1)
        object.__setattr__(self, "q", _frozen(q))

    @property
    def m(self) -> int:
        return self.q.shape[0]

    @property
    def exit_rates(self) -> NDArray[np.float64]:
        """Total exit rate ``q_i = -q_ii`` of each regime."""
        return -np.diag(self.q)

    @classmethod
    def two_state(cls, q1: float, q2: float) -> GeneratorMatrix:
        """Two-regime generator with exit rates ``q1`` (1 -> 2) and ``q2`` (2 -> 1)."""
        return cls(np.array([[-q1, q1], [q2, -q2]], dtype=np.float64))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GeneratorMatrix):
            return NotImplemented
        return self.q.shape == other.q.shape and bool(np.array_equal(self.q, other.q))

    def __hash__(self) -> int:
        return hash(self.q.tobytes())


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Regime-switching bond/stock market plus the investor's risk aversion."""

    generator: GeneratorMatrix
    r: NDArray[np.float64]
    mu: NDArray[np.float64]
    sigma: NDArray[np.float64]
    gamma: float

    def __post_init__(self) -> None:
        if not isinstance(self.generator, GeneratorMatrix):
            object.__setattr__(self, "generator", GeneratorMatrix(self.generator))
        for name in ("r", "mu", "sigma"):
            object.__setattr__(self, name, _frozen(np.atleast_1d(getattr(self, name))))
        object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def from_arrays(cls, q, r, mu, sigma, gamma: float) -> MarketModel:
        return cls(GeneratorMatrix(q), r, mu, sigma, gamma)

    @property
    def m(self) -> int:
        return self.generator.m

    @property
    def q(self) -> NDArray[np.float64]:
        return self.generator.q

    def replace(self, **changes) -> MarketModel:
        """Copy of the model with some fields replaced (``q`` accepted as a matrix)."""
        fields = dict(generator=self.generator, r=self.r, mu=self.mu,
                      sigma=self.sigma, gamma=self.gamma)
        if "q" in changes:
            changes["generator"] = GeneratorMatrix(changes.pop("q"))
        fields.update(changes)
        return MarketModel(**fields)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MarketModel):
            return NotImplemented
        return (
            self.generator == other.generator
            and all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("r", "mu", "sigma"))
            and self.gamma == other.gamma
        )

    def __hash__(self) -> int:
        return hash((self.generator, self.r.tobytes(), self.mu.tobytes(),
                     self.sigma.tobytes(), self.gamma))


@dataclass(frozen=True)
class RegimeScalars:
    """Per-regime discount coefficient ``delta`` and Sharpe ratio."""

    delta: NDArray[np.float64]
    sharpe: NDArray[np.float64]


# ----------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------
NON_CONSERVATIVE_GENERATOR = "NonConservativeGenerator"
NEGATIVE_RATE = "NegativeRate"
INVALID_GAMMA = "InvalidGamma"
DIMENSION_MISMATCH = "DimensionMismatch"


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


class ModelValidationError(ValueError):
    """Raised by :func:`validate_model`; ``violations`` lists every broken invariant."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("invalid market model:\n" + "\n".join(
            f"  - {v}" for v in self.violations))

    @property
    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def _check_generator(q: NDArray[np.float64], require_positive_exit: bool) -> list[Violation]:
    out: list[Violation] = []
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
        return [Violation(DIMENSION_MISMATCH, f"generator must be square, got shape {q.shape}")]
    if not np.all(np.isfinite(q)):
        return [Violation(DIMENSION_MISMATCH, "generator has non-finite entries")]
    m = q.shape[0]
    for i in range(m):
        for j in range(m):
            if i != j and q[i, j] < 0:
                out.append(Violation(NEGATIVE_RATE, f"q[{i},{j}] = {float(q[i, j])!r} < 0"))
        s = q[i].sum()
        if abs(s) > ROW_SUM_ATOL:
            out.append(Violation(NON_CONSERVATIVE_GENERATOR, f"row {i} sums to {float(s)!r}"))
        if m >= 2 and require_positive_exit and not -q[i, i] > 0:
            out.append(Violation(NEGATIVE_RATE, f"exit rate q_{i} = {float(-q[i, i])!r} is not positive"))
    if m == 1 and q[0, 0] != 0:
        out.append(Violation(NON_CONSERVATIVE_GENERATOR,
                             f"single-regime generator must be 0, got {float(q[0, 0])!r}"))
    return out


def validate_model(model: MarketModel, *, require_positive_exit: bool = True) -> MarketModel:
    """Check the standing assumptions on a market model.

    Parameters
    ----------
    model : MarketModel
    require_positive_exit : bool
        Demand ``q_i > 0`` for every regime when ``m >= 2``. Disable to admit
        absorbing regimes (used by the Merton-limit experiment with ``q1 = 0``).

    Returns
    -------
    The same ``model`` object.

    Raises
    ------
    ModelValidationError
        Listing every violated invariant.
    """
    violations = _check_generator(model.q, require_positive_exit)
    m = model.q.shape[0] if model.q.ndim == 2 else -1
    for name in ("r", "mu", "sigma"):
        vec = getattr(model, name)
        if vec.ndim != 1 or vec.shape[0] != m:
            violations.append(Violation(
                DIMENSION_MISMATCH, f"{name} has length {vec.size}, expected {m}"))
            continue
        for i, v in enumerate(vec):
            if not (np.isfinite(v) and v > 0):
                violations.append(Violation(NEGATIVE_RATE, f"{name}[{i}] = {float(v)!r} must be > 0"))
    g = model.gamma
    if not np.isfinite(g) or g == 0 or g >= 1:
        violations.append(Violation(INVALID_GAMMA, f"gamma = {float(g)!r}; need gamma < 1 and gamma != 0"))
    if violations:
        raise ModelValidationError(violations)
    return model


def regime_scalars(model: MarketModel) -> RegimeScalars:
    """Sharpe ratios and discount coefficients ``delta(i)``.

    ``delta(i) = -gamma * (sharpe(i)**2 / (2 (1 - gamma)) + r(i))`` so that
    ``g(i, tau) = E[exp(-int_0^tau delta(Y_u) du) | Y_0 = i]``.
    """
    sharpe = (model.mu - model.r) / model.sigma
    gamma = model.gamma
    delta = -gamma * ((model.mu - model.r) ** 2 / (2.0 * (1.0 - gamma) * model.sigma ** 2) + model.r)
    return RegimeScalars(delta=_frozen(delta), sharpe=_frozen(sharpe))


def merton_fraction(model: MarketModel) -> NDArray[np.float64]:
    """Optimal fraction of wealth in the stock, per regime."""
    return (model.mu - model.r) / ((1.0 - model.gamma) * model.sigma ** 2)


def discount_generator(model: MarketModel) -> NDArray[np.float64]:
    """Matrix ``Q - diag(delta)``; ``g(., tau) = exp(tau * (Q - diag(delta))) @ 1``."""
    return model.q - np.diag(regime_scalars(model).delta)
