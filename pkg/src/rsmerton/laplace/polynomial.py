"""
Dense polynomial and rational-function algebra with floating-point coefficients.

Coefficients are stored in ascending order: ``coeffs[k]`` multiplies ``u**k``.
The zero polynomial has an empty coefficient array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

# Bareiss elimination up to this size, evaluation/interpolation beyond.
BAREISS_MAX_SIZE = 6


class Polynomial:
    """Real-coefficient polynomial in one variable.

    Parameters
    ----------
    coeffs : array_like
        Ascending coefficients. Trailing zeros are stripped so the leading
        coefficient is nonzero.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: ArrayLike = ()):
        c = np.array(coeffs, dtype=np.float64).ravel()
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:0]
        c.setflags(write=False)
        self.coeffs: NDArray[np.float64] = c

    @classmethod
    def constant(cls, value: float) -> Polynomial:
        return cls([value])

    @classmethod
    def from_roots(cls, roots: Sequence[complex]) -> Polynomial:
        c = np.polynomial.polynomial.polyfromroots(roots)
        return cls(np.real_if_close(c, tol=1e6).real)

    @property
    def degree(self) -> int:
        """Degree; ``-1`` for the zero polynomial."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    @property
    def lead(self) -> float:
        return float(self.coeffs[-1]) if self.coeffs.size else 0.0

    def monic(self) -> Polynomial:
        if self.is_zero:
            raise ZeroDivisionError("zero polynomial has no monic form")
        return Polynomial(self.coeffs / self.coeffs[-1])

    def __call__(self, u):
        """Horner evaluation; accepts real/complex scalars or arrays."""
        u = np.asarray(u)
        acc = np.zeros_like(u, dtype=np.result_type(u, np.float64))
        for c in self.coeffs[::-1]:
            acc = acc * u + c
        return acc[()] if acc.ndim == 0 else acc

    def scale(self, u):
        """Sum of ``|c_k| |u|**k``: the natural magnitude for residual checks."""
        return Polynomial(np.abs(self.coeffs))(np.abs(u))

    def derivative(self) -> Polynomial:
        if self.degree < 1:
            return Polynomial()
        k = np.arange(1, len(self.coeffs))
        return Polynomial(self.coeffs[1:] * k)

    def truncate(self, degree: int) -> Polynomial:
        """Drop all terms above ``degree``."""
        return Polynomial(self.coeffs[: degree + 1])

    def taylor_shift(self, a: complex) -> NDArray[np.complex128]:
        """Coefficients of ``p(u + a)`` as a polynomial in ``u`` (complex)."""
        c = self.coeffs.astype(np.complex128)
        n = len(c)
        # Repeated synthetic division.
        c = c.copy()
        for k in range(n):
            for j in range(n - 2, k - 1, -1):
                c[j] += a * c[j + 1]
        return c

    def divmod(self, other: Polynomial) -> tuple[Polynomial, Polynomial]:
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        q, r = np.polynomial.polynomial.polydiv(self.coeffs if self.coeffs.size else [0.0],
                                                other.coeffs)
        return Polynomial(q), Polynomial(r)

    def __add__(self, other) -> Polynomial:
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        out = np.zeros(n)
        out[: len(self.coeffs)] += self.coeffs
        out[: len(other.coeffs)] += other.coeffs
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial(-self.coeffs)

    def __sub__(self, other) -> Polynomial:
        return self + (-_as_poly(other))

    def __rsub__(self, other) -> Polynomial:
        return _as_poly(other) - self

    def __mul__(self, other) -> Polynomial:
        other = _as_poly(other)
        if self.is_zero or other.is_zero:
            return Polynomial()
        return Polynomial(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> Polynomial:
        return Polynomial(self.coeffs / scalar)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self) -> int:
        return hash(self.coeffs.tobytes())

    def allclose(self, other: Polynomial, rtol: float = 1e-12, atol: float = 0.0) -> bool:
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.pad(self.coeffs, (0, n - len(self.coeffs)))
        b = np.pad(other.coeffs, (0, n - len(other.coeffs)))
        return bool(np.allclose(a, b, rtol=rtol, atol=atol))

    def __repr__(self) -> str:
        return f"Polynomial({self.coeffs.tolist()})"


def _as_poly(x) -> Polynomial:
    return x if isinstance(x, Polynomial) else Polynomial.constant(float(x))


@dataclass(frozen=True)
class RationalFunction:
    num: Polynomial
    den: Polynomial

    def __call__(self, u):
        return self.num(u) / self.den(u)

    @property
    def strictly_proper(self) -> bool:
        return self.num.degree < self.den.degree

    def normalized(self) -> RationalFunction:
        """Scale numerator and denominator so the denominator is monic."""
        lead = self.den.lead
        if lead == 0:
            raise ZeroDivisionError("denominator is the zero polynomial")
        return RationalFunction(self.num / lead, self.den / lead)


# ----------------------------------------------------------------------
# Determinants of polynomial matrices
# ----------------------------------------------------------------------
PolyMatrix = list[list[Polynomial]]


def det_bareiss(a: PolyMatrix) -> Polynomial:
    """Fraction-free (Bareiss) determinant over polynomials.

    Every division in the elimination is exact in exact arithmetic; in floating
    point the (round-off sized) remainder is discarded.
    """
    n = len(a)
    if n == 0:
        return Polynomial.constant(1.0)
    m = [list(row) for row in a]
    sign = 1.0
    prev = Polynomial.constant(1.0)
    for k in range(n - 1):
        if m[k][k].is_zero:
            swap = next((i for i in range(k + 1, n) if not m[i][k].is_zero), None)
            if swap is None:
                return Polynomial()
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                quotient, _ = (m[k][k] * m[i][j] - m[i][k] * m[k][j]).divmod(prev)
                m[i][j] = quotient
        prev = m[k][k]
    return m[n - 1][n - 1] * sign


def det_interpolate(a: PolyMatrix, degree: int | None = None) -> Polynomial:
    """Determinant by evaluation on a circle and discrete Fourier interpolation.

    The matrix is evaluated at ``N > degree`` points ``rho * exp(2 pi i k / N)``;
    the FFT of the scalar determinants gives the coefficients. Sampling on a
    circle whose radius matches the root magnitudes keeps this well conditioned.
    """
    n = len(a)
    if n == 0:
        return Polynomial.constant(1.0)
    if degree is None:
        degree = sum(max((p.degree for p in row), default=0) for row in a)
    degree = max(degree, 0)
    npts = degree + 1
    # Radius from a Gershgorin-type bound on the matrix coefficients.
    rho = 1.0
    for row in a:
        rho = max(rho, sum(float(np.abs(p.coeffs[:1]).sum()) for p in row))
    nodes = rho * np.exp(2j * np.pi * np.arange(npts) / npts)
    values = np.empty(npts, dtype=np.complex128)
    for k, u in enumerate(nodes):
        mat = np.array([[p(u) if not p.is_zero else 0.0 for p in row] for row in a],
                       dtype=np.complex128)
        values[k] = np.linalg.det(mat)
    coeffs = np.fft.fft(values) / npts
    coeffs = coeffs / rho ** np.arange(npts)
    return Polynomial(coeffs.real)


def det_poly(a: PolyMatrix, degree: int | None = None) -> Polynomial:
    if len(a) <= BAREISS_MAX_SIZE:
        return det_bareiss(a)
    return det_interpolate(a, degree)
