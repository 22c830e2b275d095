import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import multibubble.dynamics as dyn
from multibubble.configuration import compute_constants
from multibubble.dynamics import (BlowDownError, Forcing, ReducedState, ShootingFailure,
                                  ShootingVariables, decompose, first_order_law_check,
                                  linearize_about_regime, lyapunov_F, lyapunov_G, monitor_values,
                                  prepare_data, radial_indicial_roots, regime_deviation,
                                  regime_state, shoot_channels, simulate, trajectory_table,
                                  vector_field)
from multibubble.interaction import DB, PointConfig, V
from multibubble.numerics.ode import IntegrationDivergence

from conftest import NU

TRIALS = settings(max_examples=100, derandomize=True, deadline=None)


def _regime_derivative(c, t):
    return np.concatenate([-2 * c * t**-3.0, -6 * c * t**-4.0, 0 * c, 0 * c])


def test_regime_is_an_exact_solution(pair, triangle):
    for cfg, bc in (pair, triangle):
        for t in (2.0, 10.0, 100.0):
            d = vector_field(cfg, regime_state(bc, t), nu=NU)
            ref = _regime_derivative(bc.c, t)
            assert np.allclose(d, ref, rtol=1e-12, atol=0)


def test_single_bubble_has_no_interaction():
    cfg = PointConfig([[0.0] * 5])
    s = ReducedState(3.0, [0.2], [0.1], [0.0], [0.0])
    d = vector_field(cfg, s, nu=NU)
    assert d[1] == 0.0 and d[0] == -0.1


def test_a_plus_closed_form(pair):
    cfg, bc = pair
    c = bc.c[0]
    T, T0 = 3.0, 2.0
    s0 = regime_state(bc, T)
    data = ReducedState(T, s0.lam, s0.b, [1e-3, 2e-3], [0.0, 0.0])
    tr = simulate(cfg, bc, data, T0, nu=NU, monitor=False, samples=11)
    ref = np.exp(-NU * (T**3 - tr.t**3) / (3 * c))
    got = tr.component("a_plus")
    assert np.allclose(got[:, 0] / 1e-3, ref, rtol=1e-6)
    assert np.allclose(got[:, 1] / 2e-3, ref, rtol=1e-6)


def test_a_minus_forward_mirrors_a_plus_backward(pair):
    cfg, bc = pair
    c = bc.c[0]
    s0 = regime_state(bc, 2.0)
    data = ReducedState(2.0, s0.lam, s0.b, [0.0, 0.0], [1e-3, 0.0])
    tr = simulate(cfg, bc, data, 3.0, nu=NU, monitor=False, samples=11)
    ref = 1e-3 * np.exp(-NU * (tr.t**3 - 8.0) / (3 * c))
    assert np.allclose(tr.component("a_minus")[:, 0], ref, rtol=1e-6)


def test_state_validation():
    with pytest.raises(ValueError):
        ReducedState(1.0, [0.1, -0.1], [0, 0], [0, 0], [0, 0])
    with pytest.raises(ValueError):
        ReducedState(1.0, [0.1], [0, 0], [0], [0])
    s = ReducedState(2.0, [0.1, 0.2], [1, 2], [3, 4], [5, 6])
    assert ReducedState.unpack(2.0, s.pack()).pack().tolist() == s.pack().tolist()


def test_blow_down_error():
    cfg = PointConfig.pair(1.0)
    bc = compute_constants(cfg)
    s = ReducedState(1.0, [1e-3, 1e-3], [1.0, 1.0], [0, 0], [0, 0])
    with pytest.raises(BlowDownError) as info:
        simulate(cfg, bc, s, 2.0, nu=NU, monitor=False)
    t, y = info.value.state
    assert 1.0 < t < 1.01 and np.min(y[:2]) <= 0


def test_forcing_models_bounded():
    a = np.array([0.3, -0.2])
    for model in ("none", "worst-case", "random-bounded", "constant"):
        ep, em = Forcing(model, 2.0, seed=5)(4.0, a, a)
        assert np.all(np.abs(ep) <= 2.0 * 4.0**-4 + 1e-18)
        assert np.all(np.abs(em) <= 2.0 * 4.0**-4 + 1e-18)
    with pytest.raises(ValueError):
        Forcing("gaussian")


def test_prepare_data_examples(pair):
    _, bc = pair
    cn = np.linalg.norm(bc.c)
    d0 = prepare_data(bc, 100.0, [0, 0, 0])
    assert np.allclose(d0.pack(), regime_state(bc, 100.0).pack(), rtol=1e-15)
    sv = ShootingVariables.from_state(d0, bc)
    assert sv.norm_sq == pytest.approx(0.0, abs=1e-20)
    d1 = prepare_data(bc, 100.0, [1, 0, 0])
    assert np.linalg.norm(d1.lam) == pytest.approx(cn * 1e-4 + 10**-4.8, rel=1e-14)
    with pytest.raises(ValueError):
        prepare_data(bc, 100.0, [0.8, 0.8, 0])
    with pytest.raises(ValueError):
        prepare_data(bc, 100.0, [0.1, 0.1])


@TRIALS
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_prepared_data_on_unit_sphere_give_unit_shooting_variables(pair, v):
    _, bc = pair
    alpha = np.array(v) / np.linalg.norm(v)
    sv = ShootingVariables.from_state(prepare_data(bc, 100.0, alpha), bc)
    assert sv.norm_sq == pytest.approx(1.0, rel=1e-9)


def test_regime_exactness_backward(pair):
    cfg, bc = pair
    tr = simulate(cfg, bc, prepare_data(bc, 100.0, [0, 0, 0]), 10.0, nu=NU, samples=50)
    assert tr.exit_reason == "reached T0" and tr.t[-1] == 10.0
    dev = regime_deviation(tr, bc)
    assert dev["lambda_weighted"] <= 1e-6 and dev["b_weighted"] <= 1e-6
    assert dev["G_scaled"] <= 1e-12


def test_polar_quantities_on_regime(triangle):
    cfg, bc = triangle
    s = regime_state(bc, 7.0)
    dec = decompose(s)
    assert np.allclose(dec.theta, bc.c / np.linalg.norm(bc.c), rtol=1e-15)
    assert np.max(np.abs(dec.b_perp)) <= 1e-15 * dec.rho
    assert abs(lyapunov_G(bc, dec)) <= 1e-13 * dec.rho**2
    assert lyapunov_F(cfg, dec) == pytest.approx(V(cfg, dec.theta), rel=1e-14)
    assert lyapunov_F(cfg, dec) == pytest.approx(bc.V_min, rel=1e-10)


def test_time_translation_is_the_backward_unstable_radial_mode(pair):
    # prepared data lie on G = 0, where r' = -2 |c|^(-1/2) r^(3/2) integrates to
    # r = |c| / (t + s)^2; a positive alpha_0 gives s < 0 and collapse at t = -s
    cfg, bc = pair
    cn = np.linalg.norm(bc.c)
    d = prepare_data(bc, 100.0, [0.05, 0, 0])
    s = np.sqrt(cn / np.linalg.norm(d.lam)) - 100.0
    tr = simulate(cfg, bc, d, 10.0, nu=NU, monitor=False, samples=20)
    r = np.linalg.norm(tr.component("lam"), axis=1)
    assert np.max(np.abs(r * (tr.t + s) ** 2 / cn - 1)) <= 1e-9
    a0 = np.array([ShootingVariables.from_state(x, bc).a0 for x in tr.states])
    assert abs(a0[-1]) > abs(a0[0])  # grows backward
    d1 = prepare_data(bc, 100.0, [1.0, 0, 0])
    s1 = np.sqrt(cn / np.linalg.norm(d1.lam)) - 100.0
    assert -s1 > 10.0
    with pytest.raises((IntegrationDivergence, BlowDownError)):
        simulate(cfg, bc, d1, 10.0, nu=NU, monitor=False)


def test_alpha0_exit_is_reported(pair):
    cfg, bc = pair
    tr = simulate(cfg, bc, prepare_data(bc, 100.0, [0.2, 0, 0]), 10.0, nu=NU)
    assert tr.exit_reason in dyn.MONITORS and tr.t[-1] > 10.0
    assert max(tr.monitors[tr.exit_reason]) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("T", [4.0, 100.0])
def test_decaying_channel_data_exit_before_T0(pair, T):
    cfg, bc = pair
    T0 = 2.0 if T < 10 else 10.0
    assert T**3 - T0**3 >= 3 * bc.c[0] * 30 / NU
    tr = simulate(cfg, bc, prepare_data(bc, T, [0, 1, 0]), T0, nu=NU)
    assert tr.exit_reason == "brouwer-boot" and tr.t[-1] > T0


def test_monitor_values_on_regime(pair):
    _, bc = pair
    m = monitor_values(regime_state(bc, 50.0), bc)
    assert set(m) == set(dyn.MONITORS)
    assert max(m.values()) <= 1e-12


def test_first_order_law(pair):
    cfg, bc = pair
    tr = simulate(cfg, bc, prepare_data(bc, 100.0, [0, 0, 0]), 10.0, nu=NU, samples=20)
    assert first_order_law_check(tr, bc).measured <= 1e-6
    tr = simulate(cfg, bc, prepare_data(bc, 100.0, [0.05, 0, 0]), 10.0, nu=NU, samples=20,
                  monitor=False)
    assert first_order_law_check(tr, bc).passed
    # channel forcing does not feed back into (lambda, b): the law is unchanged
    data = prepare_data(bc, 3.0, [0.05, 0.3, 0.2])
    free = simulate(cfg, bc, data, 2.0, nu=NU, samples=10, monitor=False)
    for model in ("worst-case", "constant", "random-bounded"):
        forced = simulate(cfg, bc, data, 2.0, nu=NU, samples=10, monitor=False, forcing=model)
        assert first_order_law_check(forced, bc).measured == pytest.approx(
            first_order_law_check(free, bc).measured, rel=1e-6)


def test_F_almost_monotone_on_perturbed_triangle(triangle):
    cfg, bc = triangle
    T = 50.0
    s0 = regime_state(bc, T)
    lam = s0.lam * (1 + T**-0.5 * np.array([0.3, -0.2, -0.1]))
    s = ReducedState(T, lam, s0.b, s0.a_plus, s0.a_minus)
    tr = simulate(cfg, bc, s, 10.0, nu=NU, samples=30, monitor=False)
    F = np.array([lyapunov_F(cfg, decompose(x)) for x in tr.states])
    assert np.all(F >= bc.V_min - 1e-12)
    C = np.max((F - F[0]) * tr.t ** (10 / 9))
    assert C < 1.0


def test_trajectory_table_columns(pair):
    cfg, bc = pair
    tr = simulate(cfg, bc, prepare_data(bc, 20.0, [0, 0, 0]), 10.0, nu=NU, samples=5)
    head, rows = trajectory_table(tr, cfg, bc)
    assert head[0] == "t" and head[-1] == "a_tilde_2" and rows.shape == (5, len(head))


@TRIALS
@given(seed=st.integers(0, 10_000), t=st.floats(1.5, 50.0))
def test_vector_field_permutation_equivariance(seed, t):
    rng = np.random.default_rng(seed)
    cfg = PointConfig.random(3, seed=seed, min_sep=0.5)
    s = ReducedState(t, rng.uniform(0.01, 0.1, 3), rng.normal(size=3), rng.normal(size=3),
                     rng.normal(size=3))
    perm = rng.permutation(3)
    a = vector_field(cfg, s, nu=NU).reshape(4, 3)
    b = vector_field(cfg.permuted(perm), s.permuted(perm), nu=NU).reshape(4, 3)
    assert np.allclose(b, a[:, perm], rtol=1e-13, atol=0)


def test_shooting_without_forcing(pair):
    cfg, bc = pair
    res = shoot_channels(cfg, bc, 3.0, 2.0, nu=NU, window=False)
    assert abs(res.tuned) <= 1e-15 * 3.0**-4
    assert res.widths[-1] <= 2.0**-50 * 2 * 3.0**-4
    assert np.allclose(np.diff(np.log2(res.widths)), -1.0)
    assert res.transversality and all(tr < 0 for _, tr in res.transversality)


def test_shooting_with_constant_forcing(pair):
    cfg, bc = pair
    res = shoot_channels(cfg, bc, 3.0, 2.0, nu=NU, forcing="constant", window=False)
    assert abs(res.tuned) > 1e-6 * 3.0**-4
    assert res.widths[-1] <= 2.0**-50 * 2 * 3.0**-4


def test_shooting_failure(pair, monkeypatch):
    cfg, bc = pair
    monkeypatch.setattr(dyn, "_shoot_run", lambda *a: (True, 1.0, 2.0, -1.0))
    with pytest.raises(ShootingFailure):
        shoot_channels(cfg, bc, 3.0, 2.0, nu=NU)
    with pytest.raises(ValueError):
        shoot_channels(cfg, bc, 2.0, 3.0, nu=NU)


def test_linearization_exponents(pair, triangle):
    assert radial_indicial_roots() == pytest.approx((6.0, -1.0), abs=1e-12)
    for cfg, bc in (pair, triangle):
        lin = linearize_about_regime(cfg, bc)
        assert lin.radial[0] == pytest.approx(6.0, abs=1e-6)
        assert lin.radial[1] == pytest.approx(-1.0, abs=1e-6)
        assert np.all(lin.tangent.real <= lin.radial[0])


def test_linearization_taylor_consistency(triangle):
    cfg, bc = triangle
    c = bc.c
    t = 10.0
    lam = c * t**-2.0
    d = np.array([0.3, -0.5, 0.2]) * lam

    def B(x):
        s = ReducedState(t, x, 0 * x, 0 * x, 0 * x)
        return vector_field(cfg, s, nu=NU)[3:6]

    errs = [np.linalg.norm(B(lam + e * d) - B(lam) - e * DB(cfg, lam) @ d) for e in (1e-2, 5e-3, 2.5e-3)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 2.0) < 0.1)
