"""Polynomial roots via Aberth-Ehrlich iteration, with multiplicity clustering."""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import NDArray

from .polynomial import Polynomial

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-12        # |p(z)| / scale(z) at convergence
MAX_ITER = 200
CLUSTER_RTOL = 1e-8         # merge roots closer than this * max(1, |z|)
REPORT_TOL = 1e-9           # |p(z)| / scale(z) accepted for a reported root
REAL_RTOL = 1e-10           # imaginary parts below this * max(1, |z|) are dropped


class RootFindingFailure(RuntimeError):
    pass


def _cauchy_radius(c: NDArray[np.float64]) -> float:
    return 1.0 + float(np.max(np.abs(c[:-1] / c[-1]))) if len(c) > 1 else 1.0


def aberth(p: Polynomial, tol: float = RESIDUAL_TOL, max_iter: int = MAX_ITER
           ) -> tuple[NDArray[np.complex128], bool]:
    """Simultaneous approximation of all roots of ``p``.

    Returns
    -------
    roots : (deg,) complex array
    converged : bool
        Whether every root reached ``|p(z)| <= tol * scale(z)``.
    """
    n = p.degree
    if n < 1:
        return np.empty(0, dtype=np.complex128), True
    dp = p.derivative()
    c = p.coeffs
    # Initial guesses on a circle around the root centroid, offset off the real axis.
    center = -c[-2] / (n * c[-1])
    radius = max(_cauchy_radius(c), 1e-3)
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    z = center + 0.5 * radius * np.exp(1j * angles)
    converged = False
    prev = np.inf
    for _ in range(max_iter):
        pz = p(z)
        converged = bool(np.all(np.abs(pz) <= tol * p.scale(z)))
        ratio = pz / dp(z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        step = ratio / (1.0 - ratio * inv.sum(axis=1))
        step[~np.isfinite(step)] = 0.0
        z = z - step
        # Keep iterating past the residual test so that clustered
        # approximations of a multiple root settle; stop once steps stall.
        size = float(np.max(np.abs(step) / np.maximum(1.0, np.abs(z))))
        if converged and (size <= 4 * np.finfo(float).eps or size >= prev):
            break
        prev = size if converged else np.inf
    pz = p(z)
    return z, bool(np.all(np.abs(pz) <= tol * p.scale(z)))


def companion_roots(p: Polynomial) -> NDArray[np.complex128]:
    return np.polynomial.polynomial.polyroots(p.coeffs).astype(np.complex128)


def _cluster(z: NDArray[np.complex128], rtol: float) -> list[tuple[complex, int]]:
    """Group roots closer than ``rtol * max(1, |z|)``; transitive (single linkage)."""
    n = len(z)
    label = list(range(n))

    def find(i: int) -> int:
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(z[i] - z[j]) <= rtol * max(1.0, abs(z[i]), abs(z[j])):
                label[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [(complex(np.mean(z[idx])), len(idx)) for idx in groups.values()]


def _multiple_root_groups(p: Polynomial, z: NDArray[np.complex128]) -> list[tuple[complex, int]]:
    """Merge spread-out approximations of a multiple root.

    Iterative methods only resolve an ``n``-fold root to about ``eps**(1/n)``;
    the approximations then scatter around the true root while their centroid
    stays accurate. A nearby group is merged when the centroid annihilates
    ``p`` and its first ``n - 1`` derivatives to working precision.
    """
    groups = _cluster(z, CLUSTER_RTOL)
    merged = True
    while merged and len(groups) > 1:
        merged = False
        best = None
        for a in range(len(groups)):
            for b in range(a + 1, len(groups)):
                (za, na), (zb, nb) = groups[a], groups[b]
                d = abs(za - zb) / max(1.0, abs(za), abs(zb))
                if d < 1e-2 and (best is None or d < best[0]):
                    best = (d, a, b)
        if best is None:
            break
        _, a, b = best
        (za, na), (zb, nb) = groups[a], groups[b]
        n = na + nb
        centroid = (za * na + zb * nb) / n
        eps = np.finfo(float).eps
        deriv = p
        ok = True
        for k in range(n):
            # An n-fold root leaves the k-th derivative at O(eps**((n-k)/n)).
            # k = 0 is the binding test: distinct roots d apart give |p| ~ d**2.
            if abs(deriv(centroid)) > 64 * eps ** ((n - k) / n) * max(deriv.scale(centroid), 1e-300):
                ok = False
                break
            deriv = deriv.derivative()
        if ok:
            groups = [g for k, g in enumerate(groups) if k not in (a, b)] + [(centroid, n)]
            merged = True
    return groups


def _polish(p: Polynomial, groups: list[tuple[complex, int]], steps: int = 5
            ) -> list[tuple[complex, int]]:
    """Newton on ``p^(n-1)``, for which an n-fold root of ``p`` is simple."""
    out = []
    for z, n in groups:
        f = p
        for _ in range(n - 1):
            f = f.derivative()
        df = f.derivative()
        for _ in range(steps):
            d = df(z)
            if d == 0:
                break
            step = f(z) / d
            if not np.isfinite(step) or abs(step) > 1e-3 * max(1.0, abs(z)):
                break
            z = z - step
            if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(z)):
                break
        out.append((complex(z), n))
    return out


def _pair_conjugates(groups: list[tuple[complex, int]]) -> list[tuple[complex, int]]:
    """Snap near-real roots to the real axis and make complex roots exact conjugate pairs."""
    real, upper = [], []
    for z, n in groups:
        if abs(z.imag) <= REAL_RTOL * max(1.0, abs(z)):
            real.append((complex(z.real, 0.0), n))
        elif z.imag > 0:
            upper.append((z, n))
    lower = [(z, n) for z, n in groups if z.imag < -REAL_RTOL * max(1.0, abs(z))]
    out = sorted(real, key=lambda t: -t[0].real)
    used = set()
    for z, n in sorted(upper, key=lambda t: (-t[0].real, t[0].imag)):
        # Average with the closest lower-half partner of equal multiplicity.
        k = min((k for k in range(len(lower)) if k not in used and lower[k][1] == n),
                key=lambda k: abs(lower[k][0] - z.conjugate()), default=None)
        if k is None:
            raise RootFindingFailure(f"complex root {z} has no conjugate partner")
        used.add(k)
        w = 0.5 * (z + lower[k][0].conjugate())
        out.extend([(w, n), (w.conjugate(), n)])
    if len(used) != len(lower):
        raise RootFindingFailure("unpaired complex roots")
    return out


def find_roots(p: Polynomial) -> list[tuple[complex, int]]:
    """All roots of a real polynomial, as ``(root, multiplicity)`` pairs.

    Conjugate roots appear adjacent, upper half-plane first. Real roots are
    exact reals (zero imaginary part).

    Raises
    ------
    RootFindingFailure
        If neither Aberth iteration nor the companion-matrix fallback yields
        roots with acceptable residuals.
    """
    if p.degree < 1:
        return []
    p = p.monic()
    z, converged = aberth(p)
    if not converged:
        logger.debug("Aberth iteration did not converge; using companion matrix")
        z = companion_roots(p)
    groups = _pair_conjugates(_polish(p, _multiple_root_groups(p, z)))
    for root, n in groups:
        resid = abs(p(root))
        if resid > REPORT_TOL * p.scale(root) and n == 1:
            raise RootFindingFailure(f"root {root} has residual {resid:.3e}")
    if sum(n for _, n in groups) != p.degree:
        raise RootFindingFailure("multiplicities do not match the degree")
    return groups
