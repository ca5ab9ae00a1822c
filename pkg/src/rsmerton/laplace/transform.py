"""
Exact ``g(i, tau)`` through the Laplace transform.

Conditioning on the first jump of the regime chain gives a renewal equation
for ``g``. Its transform is the linear system

    (u + delta_i + q_i) L_i(u) - sum_{j != i} q_ij L_j(u) = 1,

whose solution by Cramer's rule is a strictly proper rational function of
``u``. Partial fractions and the pair ``t**n e**(a t) <-> n!/(u - a)**(n+1)``
turn each ``L_i`` into a finite exponential sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..model import MarketModel, RegimeScalars, regime_scalars, validate_model
from .polynomial import Polynomial, PolyMatrix, RationalFunction, det_poly
from .roots import RootFindingFailure, find_roots

RECONSTRUCTION_RTOL = 1e-9


class DegenerateSystem(ArithmeticError):
    pass


class InconsistentPoles(ValueError):
    pass


class PartialFractionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TransformSystem:
    """``A(u) L(u) = 1`` with ``A`` a matrix of degree <= 1 polynomials."""

    matrix: PolyMatrix
    rhs: tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.matrix)


@dataclass(frozen=True)
class PoleTerm:
    """Pole ``u_k`` of multiplicity ``n``; ``residues[s-1]`` multiplies ``(u - u_k)**-s``."""

    pole: complex
    multiplicity: int
    residues: tuple[complex, ...] = ()


@dataclass(frozen=True)
class ExponentialSum:
    """``f(tau) = sum_k coeff_k * tau**power_k * exp(rate_k * tau)``.

    Complex rates come in conjugate pairs with conjugate coefficients, so the
    sum is real; calling the object returns the real part.
    """

    coeffs: NDArray[np.complex128]
    powers: NDArray[np.int64]
    rates: NDArray[np.complex128]
    regime: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=np.complex128))
        object.__setattr__(self, "powers", np.asarray(self.powers, dtype=np.int64))
        object.__setattr__(self, "rates", np.asarray(self.rates, dtype=np.complex128))

    @property
    def terms(self) -> list[tuple[complex, int, complex]]:
        return list(zip(self.coeffs.tolist(), self.powers.tolist(), self.rates.tolist()))

    def evaluate_complex(self, tau: ArrayLike):
        t = np.asarray(tau, dtype=np.float64)[..., None]
        out = (self.coeffs * t ** self.powers * np.exp(self.rates * t)).sum(axis=-1)
        return out[()] if out.ndim == 0 else out

    def __call__(self, tau: ArrayLike):
        return np.real(self.evaluate_complex(tau))

    def derivative(self, tau: ArrayLike):
        """``d f / d tau`` evaluated term by term."""
        t = np.asarray(tau, dtype=np.float64)[..., None]
        n = self.powers
        # n * tau**(n-1), with the n = 0 term identically zero (also at tau = 0).
        lower = np.where(n > 0, n * t ** np.maximum(n - 1, 0), 0.0)
        out = (self.coeffs * (lower + self.rates * t ** n) * np.exp(self.rates * t)).sum(axis=-1)
        out = np.real(out)
        return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class ValueSolution:
    """The ``m`` functions ``g(i, .)`` for a market model, plus diagnostics.

    ``horizon`` is the investment horizon ``T`` used to convert calendar time
    ``t`` to time-to-go ``T - t``; it may be ``None`` when only ``g`` is needed.
    """

    g: tuple[ExponentialSum, ...]
    model: MarketModel
    horizon: float | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def m(self) -> int:
        return len(self.g)

    def values(self, tau: float) -> NDArray[np.float64]:
        """``g(i, tau)`` for every regime."""
        return np.array([gi(tau) for gi in self.g])

    def derivatives(self, tau: float) -> NDArray[np.float64]:
        return np.array([gi.derivative(tau) for gi in self.g])


# ----------------------------------------------------------------------
# Pipeline stages
# ----------------------------------------------------------------------
def build_system(model: MarketModel, scalars: RegimeScalars | None = None) -> TransformSystem:
    """Transform-domain linear system: diagonal ``u + delta_i + q_i``, off-diagonal ``-q_ij``."""
    if scalars is None:
        scalars = regime_scalars(model)
    q = model.q
    m = model.m
    exit_rates = -np.diag(q)
    matrix: PolyMatrix = []
    for i in range(m):
        row = []
        for j in range(m):
            if i == j:
                row.append(Polynomial([scalars.delta[i] + exit_rates[i], 1.0]))
            else:
                row.append(Polynomial([-q[i, j]]))
        matrix.append(row)
    return TransformSystem(matrix, (1.0,) * m)


def solve_transform(system: TransformSystem) -> list[RationalFunction]:
    """Cramer's rule: ``L_i = det(A_i) / det(A)``, normalised to a monic denominator."""
    m = system.m
    a = system.matrix
    den = det_poly(a, degree=m)
    if den.is_zero:
        raise DegenerateSystem("determinant of the transform system is identically zero")
    ones = [Polynomial.constant(v) for v in system.rhs]
    out = []
    for i in range(m):
        ai = [[ones[r] if c == i else a[r][c] for c in range(m)] for r in range(m)]
        # Column i is constant, so det(A_i) has degree at most m - 1.
        num = det_poly(ai, degree=m - 1).truncate(m - 1)
        out.append(RationalFunction(num, den.truncate(m)).normalized())
    return out


def find_poles(den: Polynomial) -> list[PoleTerm]:
    """Roots of the denominator as residue-free :class:`PoleTerm` skeletons."""
    if den.degree < 1:
        raise InconsistentPoles("denominator must have degree >= 1")
    return [PoleTerm(pole, n) for pole, n in find_roots(den)]


def _series_product(factors: Sequence[tuple[complex, int]], order: int) -> NDArray[np.complex128]:
    """Taylor coefficients (up to ``order``) of ``prod (w + a)**n``."""
    out = np.zeros(order + 1, dtype=np.complex128)
    out[0] = 1.0
    for a, n in factors:
        for _ in range(n):
            shifted = np.zeros_like(out)
            shifted[1:] = out[:-1]
            out = shifted + a * out
    return out


def _series_divide(num: NDArray, den: NDArray, order: int) -> NDArray[np.complex128]:
    out = np.zeros(order + 1, dtype=np.complex128)
    for k in range(order + 1):
        acc = num[k] if k < len(num) else 0.0
        for j in range(1, k + 1):
            acc -= den[j] * out[k - j]
        out[k] = acc / den[0]
    return out


def partial_fractions(rf: RationalFunction, poles: Sequence[PoleTerm]) -> list[PoleTerm]:
    """Residues of a strictly proper rational function at the given poles.

    Simple poles use ``num(u_k) / den'(u_k)``. For an ``n``-fold pole the
    residues are the Taylor coefficients of ``num / prod_{j != k}(u - u_j)**n_j``
    about ``u_k``. Conjugate poles receive exactly conjugate residues.

    Raises
    ------
    InconsistentPoles
        If multiplicities do not add up to the denominator degree.
    PartialFractionError
        If the decomposition does not reproduce ``rf`` to 1e-9 relative.
    """
    rf = rf.normalized()
    if sum(p.multiplicity for p in poles) != rf.den.degree:
        raise InconsistentPoles(
            f"multiplicities sum to {sum(p.multiplicity for p in poles)}, "
            f"denominator degree is {rf.den.degree}")
    if not rf.strictly_proper:
        raise PartialFractionError("rational function is not strictly proper")
    dden = rf.den.derivative()
    out: list[PoleTerm] = []
    done: dict[complex, tuple[complex, ...]] = {}
    for k, term in enumerate(poles):
        uk, n = complex(term.pole), term.multiplicity
        if uk.imag < 0 and uk.conjugate() in done:
            residues = tuple(c.conjugate() for c in done[uk.conjugate()])
        elif n == 1:
            residues = (complex(rf.num(uk) / dden(uk)),)
        else:
            others = [(uk - complex(p.pole), p.multiplicity) for j, p in enumerate(poles) if j != k]
            nser = rf.num.taylor_shift(uk)
            dser = _series_product(others, n - 1)
            h = _series_divide(nser, dser, n - 1)
            residues = tuple(complex(h[n - s]) for s in range(1, n + 1))
        done[uk] = residues
        out.append(PoleTerm(uk, n, residues))
    err = reconstruction_error(rf, out)
    if not err <= RECONSTRUCTION_RTOL:
        raise PartialFractionError(f"partial fraction reconstruction error {err:.3e}")
    return out


def evaluate_partial_fractions(terms: Sequence[PoleTerm], u):
    u = np.asarray(u, dtype=np.complex128)
    acc = np.zeros_like(u)
    for t in terms:
        for s, c in enumerate(t.residues, start=1):
            acc = acc + c / (u - t.pole) ** s
    return acc


def reconstruction_error(rf: RationalFunction, terms: Sequence[PoleTerm], n_points: int = 5) -> float:
    """Max relative mismatch between ``rf`` and its decomposition at points off the poles."""
    radius = 2.0 * max((abs(t.pole) for t in terms), default=0.0) + 1.0
    u = radius * np.exp(1j * (0.3 + 2 * np.pi * np.arange(n_points) / n_points))
    exact = rf(u)
    approx = evaluate_partial_fractions(terms, u)
    return float(np.max(np.abs(approx - exact) / np.abs(exact)))


def invert_transform(terms: Sequence[PoleTerm], regime: int = 0) -> ExponentialSum:
    """Inverse transform: ``c / (u - a)**(n+1)`` becomes ``c * tau**n * exp(a tau) / n!``."""
    coeffs, powers, rates = [], [], []
    for t in terms:
        for s, c in enumerate(t.residues, start=1):
            coeffs.append(c / math.factorial(s - 1))
            powers.append(s - 1)
            rates.append(t.pole)
    return ExponentialSum(np.array(coeffs), np.array(powers), np.array(rates), regime)


# ----------------------------------------------------------------------
# Two-regime closed form
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class TwoStateCoefficients:
    """``L_i(u) = (u + alpha_i) / (u**2 + beta1 u + beta0)``."""

    alpha: tuple[float, float]
    beta0: float
    beta1: float

    @property
    def discriminant(self) -> float:
        return self.beta1 ** 2 - 4.0 * self.beta0

    def roots(self) -> tuple[float, float]:
        """Real roots ``u1 > u2`` of the denominator (requires a positive discriminant)."""
        disc = self.discriminant
        if not disc > 0:
            raise RootFindingFailure(f"two-state discriminant {disc!r} is not positive")
        sq = math.sqrt(disc)
        # Cancellation-free pair: the larger-magnitude root first, then Vieta.
        big = -0.5 * (self.beta1 + math.copysign(sq, self.beta1))
        small = self.beta0 / big if big != 0 else 0.0
        return (max(big, small), min(big, small))


def two_state_coefficients(model: MarketModel, scalars: RegimeScalars | None = None
                           ) -> TwoStateCoefficients:
    if model.m != 2:
        raise ValueError("two-state closed form needs m = 2")
    if scalars is None:
        scalars = regime_scalars(model)
    d1, d2 = (float(v) for v in scalars.delta)
    q1, q2 = float(model.q[0, 1]), float(model.q[1, 0])
    return TwoStateCoefficients(
        alpha=(d2 + q1 + q2, d1 + q1 + q2),
        beta0=d1 * d2 + d1 * q2 + d2 * q1,
        beta1=d1 + d2 + q1 + q2,
    )


def two_state_g(coef: TwoStateCoefficients) -> tuple[ExponentialSum, ExponentialSum]:
    """``g(i, tau) = [(u1 + a_i) e^{u1 tau} - (u2 + a_i) e^{u2 tau}] / (u1 - u2)``."""
    u1, u2 = coef.roots()
    out = []
    for i, a in enumerate(coef.alpha):
        out.append(ExponentialSum(
            np.array([(u1 + a) / (u1 - u2), -(u2 + a) / (u1 - u2)]),
            np.array([0, 0]),
            np.array([u1, u2]),
            regime=i,
        ))
    return out[0], out[1]


# ----------------------------------------------------------------------
# End to end
# ----------------------------------------------------------------------
def solve_g(model: MarketModel, horizon: float | None = None, method: str = "auto") -> ValueSolution:
    """Closed-form ``g(i, .)`` for every regime.

    Parameters
    ----------
    model : MarketModel
    horizon : float, optional
        Investment horizon ``T``, stored on the solution.
    method : {"auto", "general", "two_state"}
        ``"auto"`` takes the two-regime closed form when ``m == 2`` and the
        general Cramer/partial-fraction route otherwise.

    Raises
    ------
    RootFindingFailure, DegenerateSystem, PartialFractionError
    """
    validate_model(model, require_positive_exit=False)
    scalars = regime_scalars(model)
    diagnostics: dict[str, Any] = {"delta": scalars.delta.copy()}
    if model.m == 2:
        coef = two_state_coefficients(model, scalars)
        diagnostics["discriminant"] = coef.discriminant
        diagnostics["two_state"] = coef
        use_fast = method == "two_state" or (method == "auto" and coef.discriminant > 0)
    else:
        if method == "two_state":
            raise ValueError("two_state method needs m = 2")
        use_fast = False

    if use_fast:
        g = two_state_g(coef)
        diagnostics["method"] = "two_state"
        diagnostics["poles"] = [complex(u) for u in coef.roots()]
        return ValueSolution(g, model, horizon, diagnostics)

    transforms = solve_transform(build_system(model, scalars))
    poles = find_poles(transforms[0].den)
    g = []
    residues, residuals = [], []
    for i, rf in enumerate(transforms):
        terms = partial_fractions(rf, poles)
        residues.append([t.residues for t in terms])
        residuals.append(reconstruction_error(rf, terms))
        g.append(invert_transform(terms, regime=i))
    diagnostics.update(
        method="general",
        transforms=transforms,
        poles=[t.pole for t in poles],
        multiplicities=[t.multiplicity for t in poles],
        residues=residues,
        reconstruction_residuals=residuals,
    )
    return ValueSolution(tuple(g), model, horizon, diagnostics)
