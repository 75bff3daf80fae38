import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oracles import gauss_hermite_expectation, grid_argmax, penalty_ref, pi_quadrature
from sparse_gdf import scalar_penalty as sp
from sparse_gdf.core import DegenerateScad, ElasticNet, L0, L1, L2, Scad, gauss_density

PENALTIES = [L1(0.7), ElasticNet(0.7, 0.3), L2(0.4), L0(0.6), Scad(0.8, 5.0, 0.5), Scad(1.0, 8.0, 1.0)]
IDS = ["l1", "en", "l2", "l0", "scad5", "scad8"]

# (Qhat, chihat) points; Qhat (a-1) > eta holds for both SCAD penalties
POINTS = [(1.0, 1.0), (0.45, 0.3), (2.0, 3.5)]


def _z_breaks(penalty, Qhat, chihat):
    if isinstance(penalty, L2):
        return ()
    return tuple(math.sqrt(2) * t for t in sp.thresholds(penalty, Qhat, chihat))


def test_frozen_scalars():
    assert sp.omega(1.0) == pytest.approx(0.415107497420595, abs=1e-15)
    assert sp.omega(0.0) == 0.0
    t = sp.thresholds(Scad(1.0, 5.0, 0.5), 1.0, 1.0)
    np.testing.assert_allclose(t, [0.35355339059327373, 0.7071067811865475, 1.7677669529663687], rtol=1e-14)


def test_omega_rejects_negative():
    with pytest.raises(ValueError):
        sp.omega(-0.1)


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
def test_penalty_value_matches_definition(penalty):
    xs = np.linspace(-6, 6, 241)
    got = sp.penalty_value(penalty, xs)
    ref = [penalty_ref(penalty, x) for x in xs]
    np.testing.assert_allclose(got, ref, atol=1e-14)
    assert isinstance(sp.penalty_value(penalty, 0.3), float)


def test_scad_penalty_is_continuous():
    p = Scad(1.3, 4.0, 0.7)
    for x in (p.lam, p.a * p.lam):
        assert sp.penalty_value(p, x - 1e-12) == pytest.approx(sp.penalty_value(p, x + 1e-12), abs=1e-10)


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
@settings(max_examples=60, deadline=None)
@given(h=st.floats(-5, 5), Qhat=st.floats(0.3, 3.0))
def test_argmax_matches_grid_search(penalty, h, Qhat):
    if isinstance(penalty, Scad) and Qhat * (penalty.a - 1) <= penalty.eta * 1.05:
        return
    x = sp.single_body_argmax(penalty, h, Qhat)
    ref = grid_argmax(penalty, h, Qhat)
    obj = lambda v: -0.5 * Qhat * v * v + h * v - penalty_ref(penalty, v)
    # agree in location, or tie in objective (exactly at a jump)
    assert abs(x - ref) <= 1e-4 or abs(obj(x) - obj(ref)) <= 1e-9


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
def test_argmax_broadcasts(penalty):
    h = np.linspace(-3, 3, 13)
    arr = sp.single_body_argmax(penalty, h, 1.0)
    assert arr.shape == h.shape
    np.testing.assert_allclose(arr, [sp.single_body_argmax(penalty, float(v), 1.0) for v in h])


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
def test_slope_is_derivative(penalty):
    Qhat = 1.1
    hs = np.linspace(-4, 4, 81) + 0.0123  # stay off the thresholds
    eps = 1e-7
    fd = (sp.single_body_argmax(penalty, hs + eps, Qhat) - sp.single_body_argmax(penalty, hs - eps, Qhat)) / (2 * eps)
    np.testing.assert_allclose(sp.single_body_slope(penalty, hs, Qhat), fd, atol=1e-6)


def test_l0_tie_returns_zero():
    Qhat, eta = 1.0, 0.5
    h = math.sqrt(2 * eta * Qhat)
    assert sp.single_body_argmax(L0(eta), h, Qhat) == 0.0


def test_scad_degenerate():
    p = Scad(2.0, 3.0, 1.0)
    with pytest.raises(DegenerateScad):
        sp.single_body_argmax(p, 1.0, 0.5)
    with pytest.raises(DegenerateScad):
        sp.thresholds(p, 1.0, 1.0)


def test_thresholds_need_positive_chihat():
    with pytest.raises(ValueError):
        sp.thresholds(L1(1.0), 1.0, 0.0)


def test_scad_large_a_approaches_l1():
    # a -> inf: SCAD(eta, a, lam) becomes l1 with weight eta * lam
    Qh, ch = 0.8, 1.3
    s, l = Scad(0.5, 1e6, 2.0), L1(1.0)
    assert sp.chi_contrib(s, Qh, ch) == pytest.approx(sp.chi_contrib(l, Qh, ch), rel=1e-5)
    assert sp.q_contrib(s, Qh, ch) == pytest.approx(sp.q_contrib(l, Qh, ch), rel=1e-5)


def test_en_without_ridge_is_l1():
    for Qh, ch in POINTS:
        for f in (sp.pi_value, sp.chi_contrib, sp.q_contrib, sp.slope_square_mean):
            assert f(ElasticNet(0.7, 0.0), Qh, ch) == f(L1(0.7), Qh, ch)


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
@pytest.mark.parametrize("Qhat,chihat", POINTS)
def test_pi_matches_quadrature(penalty, Qhat, chihat):
    ref = pi_quadrature(penalty, Qhat, chihat, sp.single_body_argmax, _z_breaks(penalty, Qhat, chihat))
    assert sp.pi_value(penalty, Qhat, chihat) == pytest.approx(ref, abs=1e-8)


def _moment(penalty, Qhat, chihat, fn):
    s = math.sqrt(chihat)
    br = _z_breaks(penalty, Qhat, chihat)
    pts = sorted({0.0, *br, 40.0})
    f = lambda z: fn(sp.single_body_argmax(penalty, s * z, Qhat), s * z) * gauss_density(z)
    return 2 * sum(integrate.quad(f, a, b, epsabs=1e-14, limit=200)[0] for a, b in zip(pts[:-1], pts[1:]))


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
@pytest.mark.parametrize("Qhat,chihat", POINTS)
def test_q_contrib_is_second_moment(penalty, Qhat, chihat):
    ref = _moment(penalty, Qhat, chihat, lambda x, h: x * x)
    assert sp.q_contrib(penalty, Qhat, chihat) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
@pytest.mark.parametrize("Qhat,chihat", POINTS)
def test_chi_contrib_stein(penalty, Qhat, chihat):
    # Stein: E[x* z] / sqrt(chihat) includes the l0 jump
    ref = _moment(penalty, Qhat, chihat, lambda x, h: x * h) / chihat
    assert sp.chi_contrib(penalty, Qhat, chihat) == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
@pytest.mark.parametrize("Qhat,chihat", POINTS)
def test_saddle_rhs_are_pi_derivatives(penalty, Qhat, chihat):
    e = 1e-5
    d_chihat = (sp.pi_value(penalty, Qhat, chihat * (1 + e)) - sp.pi_value(penalty, Qhat, chihat * (1 - e))) / (2 * e * chihat)
    d_Qhat = (sp.pi_value(penalty, Qhat * (1 + e), chihat) - sp.pi_value(penalty, Qhat * (1 - e), chihat)) / (2 * e * Qhat)
    assert sp.chi_contrib(penalty, Qhat, chihat) == pytest.approx(d_chihat, rel=1e-5)
    assert sp.q_contrib(penalty, Qhat, chihat) == pytest.approx(-d_Qhat, rel=1e-5)


@pytest.mark.parametrize("penalty", [p for p in PENALTIES if not isinstance(p, L0)], ids=[i for i in IDS if i != "l0"])
@pytest.mark.parametrize("Qhat,chihat", POINTS)
def test_slope_square_mean(penalty, Qhat, chihat):
    s = math.sqrt(chihat)
    pts = sorted({0.0, *_z_breaks(penalty, Qhat, chihat), 40.0})
    f = lambda z: sp.single_body_slope(penalty, s * z, Qhat) ** 2 * gauss_density(z)
    ref = 2 * sum(integrate.quad(f, a, b, epsabs=1e-14)[0] for a, b in zip(pts[:-1], pts[1:]))
    assert sp.slope_square_mean(penalty, Qhat, chihat) == pytest.approx(ref, abs=1e-9)


def test_l0_slope_square_mean_infinite():
    assert sp.slope_square_mean(L0(0.5), 1.0, 1.0) == math.inf


def test_l2_gauss_hermite():
    p, Qh, ch = L2(0.4), 0.9, 1.7
    ref = gauss_hermite_expectation(lambda z: (math.sqrt(ch) * z) ** 2 / (Qh + p.eta2))
    assert sp.pi_value(p, Qh, ch) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
def test_rho_hat_is_support_fraction(penalty):
    Qh, ch = 1.0, 1.0
    ref = _moment(penalty, Qh, ch, lambda x, h: float(x != 0))
    assert sp.rho_hat(penalty, Qh, ch) == pytest.approx(ref, abs=1e-9)
