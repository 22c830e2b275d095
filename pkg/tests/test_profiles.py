import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multibubble import profiles as P
from multibubble.numerics.quadrature import default_grid, gauss_grid, quad_radial

TRIALS = settings(max_examples=100, derandomize=True, deadline=None)


def test_W_values():
    assert P.eval_W(0.0) == 1.0
    assert P.eval_W(math.sqrt(15.0)) == pytest.approx(2**-1.5, rel=1e-15)
    r = 1e3
    assert r**3 * P.eval_W(r) == pytest.approx(15**1.5, rel=1e-2)


def test_negative_radius_rejected():
    for fn in (P.eval_W, P.eval_LambdaW, P.eval_gradW_radial, P.eval_ULambdaLambdaW):
        with pytest.raises(ValueError):
            fn(-1.0)


def test_W_positive_and_decreasing():
    r = np.linspace(0, 200, 4001)
    w = P.eval_W(r)
    assert np.all(w > 0) and np.all(np.diff(w) < 0)


def test_generator_values_at_origin():
    assert P.eval_LambdaW(0.0) == 1.5
    assert P.eval_gradW_radial(0.0) == 0.0
    assert P.eval_ULambdaLambdaW(0.0) == pytest.approx(2.5 * 1.5)


def test_generators_against_definitions():
    # Lambda W = 3/2 W + r W', Lambda_ v = 5/2 v + r v'
    r = np.linspace(0.0, 50.0, 301)
    assert np.allclose(P.eval_LambdaW(r), 1.5 * P.eval_W(r) + r * P.eval_gradW_radial(r),
                       rtol=1e-13, atol=1e-16)
    assert np.allclose(P.eval_ULambdaLambdaW(r), 2.5 * P.eval_LambdaW(r) + r * P.eval_LambdaW_r(r),
                       rtol=1e-12, atol=1e-16)


def test_generator_tails_decay_like_r_cubed():
    r = np.array([1e3, 1e4])
    for fn in (P.eval_LambdaW, P.eval_ULambdaLambdaW):
        v = np.abs(fn(r))
        assert math.log(v[1] / v[0]) / math.log(10) == pytest.approx(-3.0, abs=1e-3)


def test_LambdaW_norm_against_mpmath():
    mp.mp.dps = 30
    area = 8 * mp.pi**2 / 3
    lw = lambda r: mp.mpf(1.5) * (1 - r**2 / 15) * (1 + r**2 / 15) ** mp.mpf(-2.5)
    exact = area * mp.quad(lambda r: lw(r) ** 2 * r**4, [0, 1, 10, mp.inf])
    got = quad_radial(lambda r: P.eval_LambdaW(r) ** 2, default_grid())
    assert got > 0
    assert got == pytest.approx(float(exact), rel=1e-10)


def test_nonlinearity_examples():
    assert P.nonlinearity(0.0) == (0.0, 0.0, 0.0, 0.0)
    assert P.nonlinearity(2.0)[0] == pytest.approx(2 ** (7 / 3), rel=1e-15)
    f, _, fp, _ = P.nonlinearity(-1.0)
    assert f == -1.0 and fp == pytest.approx(7 / 3)


def test_nonlinearity_derivatives_by_finite_differences():
    u = np.array([-3.0, -0.4, 0.7, 2.5])
    h = 1e-5
    f, F, fp, fpp = P.nonlinearity(u)
    assert np.allclose((P.F(u + h) - P.F(u - h)) / (2 * h), f, rtol=1e-8)
    assert np.allclose((P.f(u + h) - P.f(u - h)) / (2 * h), fp, rtol=1e-8)
    assert np.allclose((P.fprime(u + h) - P.fprime(u - h)) / (2 * h), fpp, rtol=1e-7)


def test_ground_state_residual():
    assert P.verify_ground_state(default_grid()).passed
    assert abs(P.ground_state_residual(1.0)) <= 1e-12
    assert P.verify_ground_state(gauss_grid(r_max=1e3)).passed


def test_taylor_remainders_vanish_at_trivial_points():
    assert P.taylor1_remainder(1.0, 0.0) == 0.0
    assert P.taylor1_remainder(0.0, 1.0) == 0.0


def test_taylor_remainder_check_on_coarse_lattice_then_random():
    lat = np.linspace(-10, 10, 81)
    U, Vv = np.meshgrid(lat, lat)
    ratio = P._ratio(P.taylor1_remainder(U, Vv), P.taylor1_bound(U, Vv))
    assert np.isfinite(ratio).all() and ratio.max() <= 10
    rep = P.taylor_remainder_check(samples=10_000)
    assert rep.passed and rep.measured > 0


def test_pohozaev_identity():
    g = default_grid()
    a = quad_radial(lambda r: P.eval_W(r) ** (10 / 3), g)
    b = quad_radial(lambda r: P.eval_gradW_radial(r) ** 2, g)
    assert a == pytest.approx(b, rel=1e-8)


@TRIALS
@given(lam=st.floats(1e-3, 1e3), r=st.floats(0.0, 1e4))
def test_scaling_coherence(lam, r):
    assert P.rescale_H1(P.eval_W, lam)(lam * r) == pytest.approx(lam**-1.5 * P.eval_W(r),
                                                                 rel=1e-14)


@TRIALS
@given(r=st.floats(0.0, 200.0))
def test_generator_is_derivative_of_scaling(r):
    # d/dlam at lam = 1 of lam^(-3/2) W(r/lam) = -Lambda W(r), central differences
    h = 1e-4
    d = (P.rescale_H1(P.eval_W, 1 + h)(r) - P.rescale_H1(P.eval_W, 1 - h)(r)) / (2 * h)
    assert d == pytest.approx(-P.eval_LambdaW(r), abs=1e-7 * (1 + abs(P.eval_LambdaW(r))))


@TRIALS
@given(u=st.floats(-1e3, 1e3))
def test_odd_symmetry(u):
    assert P.f(-u) == -P.f(u)
    assert P.F(-u) == P.F(u)
