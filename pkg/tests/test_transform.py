import math

import numpy as np
import pytest
from scipy.integrate import quad

from rsmerton import MarketModel, presets
from rsmerton.laplace import (
    ExponentialSum,
    InconsistentPoles,
    PartialFractionError,
    PoleTerm,
    Polynomial,
    RationalFunction,
    build_system,
    find_poles,
    invert_transform,
    partial_fractions,
    solve_g,
    solve_transform,
    two_state_coefficients,
)
from rsmerton.model import discount_generator, regime_scalars
from rsmerton.oracles import matexp_g

from conftest import random_model, random_models

TAUS = (0.1, 0.25, 0.5)


def match_sets(a, b):
    """Max distance between two multisets of complex numbers under the best greedy pairing."""
    b = list(b)
    worst = 0.0
    for z in a:
        k = min(range(len(b)), key=lambda k: abs(b[k] - z))
        worst = max(worst, abs(b.pop(k) - z) / max(1.0, abs(z)))
    return worst


def cyclic_model(rate=6.0, gamma=0.3):
    q = np.array([[-rate, rate, 0.0], [0.0, -rate, rate], [rate, 0.0, -rate]])
    return MarketModel.from_arrays(q, [0.05] * 3, [0.5, 0.1, 0.3], [0.3, 0.5, 0.7], gamma)


# ----------------------------------------------------------------------
# build_system / solve_transform
# ----------------------------------------------------------------------
def test_build_system_two_state(two_state):
    sys_ = build_system(two_state)
    d = regime_scalars(two_state).delta
    assert sys_.matrix[0][0] == Polynomial([d[0] + 20.0, 1.0])
    assert sys_.matrix[1][1] == Polynomial([d[1] + 30.0, 1.0])
    assert sys_.matrix[0][1] == Polynomial([-20.0])
    assert sys_.matrix[1][0] == Polynomial([-30.0])
    assert sys_.rhs == (1.0, 1.0)


def test_build_system_single_regime():
    model = presets.single_state(0.1)
    sys_ = build_system(model)
    assert sys_.m == 1
    assert sys_.matrix[0][0] == Polynomial([regime_scalars(model).delta[0], 1.0])


def test_symmetric_two_state_transforms_collapse():
    model = MarketModel.from_arrays([[-7.0, 7.0], [7.0, -7.0]], [0.05] * 2, [0.3] * 2, [0.4] * 2, 0.5)
    d = regime_scalars(model).delta[0]
    for rf in solve_transform(build_system(model)):
        for u in (1.0, 3.5, -d + 2.0j):
            assert rf(u) == pytest.approx(1.0 / (u + d), rel=1e-13)
    sol = solve_g(model, method="general")
    for tau in TAUS:
        np.testing.assert_allclose(sol.values(tau), math.exp(-d * tau), rtol=1e-13)


@pytest.mark.parametrize("gamma", [0.1, 0.5, -1.0])
def test_two_state_alpha_beta(gamma):
    model = presets.two_state(gamma)
    coef = two_state_coefficients(model)
    d1, d2 = regime_scalars(model).delta
    assert coef.alpha == pytest.approx((d2 + 50.0, d1 + 50.0))
    assert coef.beta0 == pytest.approx(d1 * d2 + d1 * 30.0 + d2 * 20.0)
    assert coef.beta1 == pytest.approx(d1 + d2 + 50.0)
    rfs = solve_transform(build_system(model))
    for i, rf in enumerate(rfs):
        assert rf.num.allclose(Polynomial([coef.alpha[i], 1.0]), rtol=1e-13)
        assert rf.den.allclose(Polynomial([coef.beta0, coef.beta1, 1.0]), rtol=1e-13)


def test_single_regime_transform():
    model = presets.single_state(0.1)
    (rf,) = solve_transform(build_system(model))
    assert rf.num == Polynomial([1.0])
    assert rf.den.allclose(Polynomial([regime_scalars(model).delta[0], 1.0]))


@pytest.mark.parametrize("gamma", [0.1, 0.9])
def test_three_state_denominator_is_characteristic_polynomial(gamma):
    model = presets.three_state(gamma)
    eig = np.linalg.eigvals(discount_generator(model))
    charpoly = Polynomial(np.real(np.polynomial.polynomial.polyfromroots(eig)))
    for rf in solve_transform(build_system(model)):
        assert rf.den.allclose(charpoly, rtol=1e-10, atol=1e-10)


# ----------------------------------------------------------------------
# find_poles / partial_fractions / invert_transform
# ----------------------------------------------------------------------
def test_two_state_poles_distinct_real(two_state):
    poles = find_poles(solve_transform(build_system(two_state))[0].den)
    assert [p.multiplicity for p in poles] == [1, 1]
    assert all(p.pole.imag == 0 for p in poles)
    u1, u2 = two_state_coefficients(two_state).roots()
    assert sorted(p.pole.real for p in poles) == pytest.approx([u2, u1], rel=1e-12)


def test_double_pole_skeleton():
    poles = find_poles(Polynomial([1.0, 2.0, 1.0]))
    assert len(poles) == 1 and poles[0].multiplicity == 2
    assert poles[0].pole == pytest.approx(-1.0)


def test_cyclic_chain_has_complex_pair():
    model = cyclic_model()
    den = solve_transform(build_system(model))[0].den
    poles = find_poles(den)
    assert sum(1 for p in poles if p.pole.imag == 0) == 1
    assert sum(1 for p in poles if p.pole.imag != 0) == 2
    assert match_sets([p.pole for p in poles], np.linalg.eigvals(discount_generator(model))) < 1e-10


def test_two_state_residues(two_state):
    coef = two_state_coefficients(two_state)
    u1, u2 = coef.roots()
    rf = solve_transform(build_system(two_state))[0]
    terms = {t.pole.real: t.residues for t in partial_fractions(rf, find_poles(rf.den))}
    a1 = coef.alpha[0]
    got = sorted(terms.items())
    assert got[1][1][0] == pytest.approx((u1 + a1) / (u1 - u2), rel=1e-12)
    assert got[0][1][0] == pytest.approx((u2 + a1) / (u2 - u1), rel=1e-12)


def test_single_pole_residue():
    rf = RationalFunction(Polynomial([1.0]), Polynomial([0.3, 1.0]))
    (t,) = partial_fractions(rf, find_poles(rf.den))
    assert t.pole == pytest.approx(-0.3)
    assert t.residues == (pytest.approx(1.0),)
    g = invert_transform([t])
    for tau in TAUS:
        assert g(tau) == pytest.approx(math.exp(-0.3 * tau), rel=1e-14)


def test_pure_double_pole():
    rf = RationalFunction(Polynomial([1.0]), Polynomial([1.0, 2.0, 1.0]))
    (t,) = partial_fractions(rf, find_poles(rf.den))
    assert t.multiplicity == 2
    assert t.residues[0] == pytest.approx(0.0, abs=1e-12)
    assert t.residues[1] == pytest.approx(1.0, rel=1e-12)
    g = invert_transform([t])
    for tau in (0.0, 0.5, 2.0):
        assert g(tau) == pytest.approx(tau * math.exp(-tau), abs=1e-12)


def test_mixed_multiplicity_decomposition():
    # (u + 2) / ((u + 1)^2 (u - 3)); residues computed by hand:
    # at 3: 5/16; at -1: coefficient of (u+1)^-2 is 1/(-4) = -1/4,
    # of (u+1)^-1 is d/du[(u+2)/(u-3)] at -1 = -5/16.
    rf = RationalFunction(Polynomial([2.0, 1.0]), Polynomial.from_roots([-1.0, -1.0, 3.0]))
    terms = {round(t.pole.real): t for t in partial_fractions(rf, find_poles(rf.den))}
    assert terms[3].residues == (pytest.approx(5 / 16),)
    assert terms[-1].residues[0] == pytest.approx(-5 / 16)
    assert terms[-1].residues[1] == pytest.approx(-1 / 4)


def test_inconsistent_poles():
    rf = RationalFunction(Polynomial([1.0]), Polynomial([2.0, 3.0, 1.0]))
    with pytest.raises(InconsistentPoles):
        partial_fractions(rf, [PoleTerm(-1.0 + 0j, 1)])


def test_wrong_poles_fail_reconstruction():
    rf = RationalFunction(Polynomial([1.0]), Polynomial([2.0, 3.0, 1.0]))
    with pytest.raises(PartialFractionError):
        partial_fractions(rf, [PoleTerm(-1.0 + 0j, 1), PoleTerm(-2.5 + 0j, 1)])


def test_improper_function_rejected():
    rf = RationalFunction(Polynomial([1.0, 1.0]), Polynomial([2.0, 1.0]))
    with pytest.raises(PartialFractionError):
        partial_fractions(rf, find_poles(rf.den))


def test_conjugate_residues_and_realness():
    model = cyclic_model()
    sol = solve_g(model)
    for i, residues in enumerate(sol.diagnostics["residues"]):
        poles = sol.diagnostics["poles"]
        for k, z in enumerate(poles):
            if z.imag > 0:
                k2 = poles.index(z.conjugate())
                assert residues[k2][0] == residues[k][0].conjugate()
    taus = np.linspace(0.0, 2.0, 101)
    for g in sol.g:
        vals = g.evaluate_complex(taus)
        assert np.all(np.abs(vals.imag) <= 1e-10 * np.abs(vals.real))


def test_exponential_sum_derivative_matches_finite_difference(three_state):
    sol = solve_g(three_state)
    h = 1e-5
    for g in sol.g:
        for tau in (0.05, 0.3, 0.5):
            fd = (g(tau + h) - g(tau - h)) / (2 * h)
            assert g.derivative(tau) == pytest.approx(fd, rel=1e-8)
    g = ExponentialSum(np.array([2.0]), np.array([1]), np.array([-1.0]))
    assert g.derivative(0.0) == pytest.approx(2.0)


# ----------------------------------------------------------------------
# solve_g
# ----------------------------------------------------------------------
def test_solve_g_two_state_reference_value(two_state):
    g = solve_g(two_state).values(0.5)
    assert f"{g[0]:.7f}" == "1.0419994"
    assert f"{g[1]:.8f}" == "1.03940982"


def test_solve_g_three_state_reference_value():
    g = solve_g(presets.three_state(0.5)).values(0.5)
    assert (f"{g[0]:.6f}", f"{g[1]:.8f}", f"{g[2]:.7f}") == ("1.231227", "1.20948267", "1.1813947")


@pytest.mark.parametrize("model", [presets.two_state(0.9), presets.three_state(-2.0),
                                   presets.single_state(0.3), cyclic_model()])
def test_terminal_condition(model):
    np.testing.assert_allclose(solve_g(model).values(0.0), 1.0, atol=1e-10)


def test_large_system_uses_interpolation_route():
    rng = np.random.default_rng(77)
    for m in (7, 8):
        model = random_model(rng, m)
        sol = solve_g(model)
        for tau in TAUS:
            np.testing.assert_allclose(sol.values(tau), matexp_g(model, tau), rtol=1e-8)


def test_absorbing_bull_regime_gives_merton_factor():
    model = presets.two_state(0.1, q1=0.0)
    sol = solve_g(model)
    d1 = regime_scalars(model).delta[0]
    assert sol.values(0.5)[0] == pytest.approx(math.exp(-d1 * 0.5), rel=1e-12)


def test_two_state_method_needs_two_regimes(three_state):
    with pytest.raises(ValueError):
        solve_g(three_state, method="two_state")


# ----------------------------------------------------------------------
# Structural invariants over randomised models
# ----------------------------------------------------------------------
MODELS = random_models(40, seed=11) + [presets.two_state(0.1), presets.three_state(0.9), cyclic_model()]


@pytest.mark.parametrize("model", MODELS)
def test_properness_and_shared_denominator(model):
    rfs = solve_transform(build_system(model))
    den = rfs[0].den
    for rf in rfs:
        assert rf.den == den
        assert rf.den.degree == model.m
        assert rf.num.degree == model.m - 1
        assert rf.den.lead == 1.0


@pytest.mark.parametrize("model", MODELS)
def test_poles_are_eigenvalues(model):
    sol = solve_g(model, method="general")
    poles = [p for p, n in zip(sol.diagnostics["poles"], sol.diagnostics["multiplicities"])
             for _ in range(n)]
    assert match_sets(poles, np.linalg.eigvals(discount_generator(model))) <= 1e-8


@pytest.mark.parametrize("model", MODELS[:15] + MODELS[-3:])
def test_renewal_equation(model):
    sol = solve_g(model)
    d = regime_scalars(model).delta
    q = model.q
    for tau in TAUS:
        for i in range(model.m):
            k = d[i] - q[i, i]
            rhs = math.exp(-k * tau)
            for j in range(model.m):
                if j == i or q[i, j] == 0:
                    continue
                integral, _ = quad(lambda s: math.exp(-k * s) * sol.g[j](tau - s), 0.0, tau,
                                   epsabs=0.0, epsrel=1e-13, limit=200)
                rhs += q[i, j] * integral
            assert sol.g[i](tau) == pytest.approx(rhs, rel=1e-7)


@pytest.mark.parametrize("model", MODELS)
def test_positivity_on_grid(model):
    sol = solve_g(model)
    for tau in np.linspace(0.0, 0.5, 100):
        assert np.all(sol.values(tau) > 0)


def test_two_state_fast_path_matches_general_path():
    rng = np.random.default_rng(5)
    for _ in range(200):
        model = random_model(rng, 2)
        fast, general = solve_g(model, method="two_state"), solve_g(model, method="general")
        for tau in (0.1, 0.25, 0.5, 1.0):
            np.testing.assert_allclose(fast.values(tau), general.values(tau), rtol=1e-10)
