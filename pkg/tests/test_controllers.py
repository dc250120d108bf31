import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PRINTED_K
from heli_ilqr.controllers import (
    DerivativeEstimator,
    PidGains,
    UltraLocalConfig,
    estimate_F,
    ilqr_pid_control,
    lqr_pid_control,
    oracle_ilqr_pid_control,
    partition_gain,
    pid_term,
    true_F,
    update_integral,
)
from heli_ilqr.model import build_linear_model
from heli_ilqr.simulate import DEG, Scenario, run_closed_loop

vec2 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=2).map(np.array)
CFG = UltraLocalConfig()


@pytest.fixture(scope="module")
def printed_gains():
    return partition_gain(PRINTED_K)


def test_partition_blocks(printed_gains):
    g = printed_gains
    np.testing.assert_array_equal(g.K_P, [[18.9, 1.98], [-2.22, 19.4]])
    np.testing.assert_array_equal(g.K_D, [[7.48, 1.53], [-0.45, 11.9]])
    np.testing.assert_array_equal(g.K_I, [[7.03, 0.77], [-0.77, 7.03]])
    np.testing.assert_array_equal(g.as_matrix(), PRINTED_K)


def test_partition_rejects_bad_shape():
    with pytest.raises(ValueError):
        partition_gain(np.zeros((2, 4)))


def test_lqr_pid_examples(printed_gains):
    u = lqr_pid_control(printed_gains, np.array([0.1, 0.0]), np.zeros(2), np.zeros(2))
    np.testing.assert_allclose(u, [-1.89, 0.222], atol=1e-12)
    u = lqr_pid_control(printed_gains, np.zeros(2), np.array([0.0, 0.2]), np.array([0.5, 0.0]))
    np.testing.assert_allclose(u, [-(0.306 + 3.515), -(2.38 - 0.385)], atol=1e-12)


def test_ilqr_pid_examples(printed_gains):
    z = np.zeros(2)
    u = ilqr_pid_control(np.array([1.3, 0.43]), z, printed_gains, z, z, z, CFG)
    np.testing.assert_allclose(u, [-1.0, -1.0], atol=1e-12)
    u = ilqr_pid_control(z, np.array([2.6, -0.86]), printed_gains, z, z, z, CFG)
    np.testing.assert_allclose(u, [2.0, -2.0], atol=1e-12)


@given(vec2, vec2, vec2, vec2, vec2)
def test_ilqr_law_inverts_ultra_local_model(F, ydd_ref, e, e_dot, e_int):
    g = partition_gain(PRINTED_K)
    u = ilqr_pid_control(F, ydd_ref, g, e, e_dot, e_int, CFG)
    # plugging u back into y'' = F + alpha u gives the closed-loop error dynamics
    np.testing.assert_allclose(F + CFG.alpha * u - ydd_ref, -pid_term(g, e, e_dot, e_int), atol=1e-9)


@given(vec2, vec2, vec2, vec2, vec2, vec2, st.floats(-3, 3))
def test_lqr_pid_is_linear(e1, d1, i1, e2, d2, i2, c):
    g = partition_gain(PRINTED_K)
    lhs = lqr_pid_control(g, e1 + c * e2, d1 + c * d2, i1 + c * i2)
    rhs = lqr_pid_control(g, e1, d1, i1) + c * lqr_pid_control(g, e2, d2, i2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_ultra_local_config_validation():
    np.testing.assert_array_equal(CFG.alpha, [1.3, 0.43])
    with pytest.raises(ValueError):
        UltraLocalConfig(nu=1)
    with pytest.raises(ValueError):
        UltraLocalConfig(alpha_yaw=0.0)


def test_estimate_F_subtracts_input_term():
    np.testing.assert_allclose(estimate_F([1.0, 2.0], CFG, [1.0, -1.0]), [1.0 - 1.3, 2.0 + 0.43])


# --- derivative estimator -----------------------------------------------------

def _feed(est, fn, dt, n):
    out = None
    for k in range(n):
        out = est.update(fn(k * dt))
    return out


def test_estimator_constant_signal_has_zero_derivatives():
    est = DerivativeEstimator(0.002)
    vel, acc = _feed(est, lambda t: np.array([0.3, -1.0]), 0.002, 50)
    np.testing.assert_allclose(vel, 0, atol=1e-12)
    np.testing.assert_allclose(acc, 0, atol=1e-9)


@pytest.mark.parametrize("stencil", [4, 5])
def test_estimator_exact_on_quadratic_without_filter(stencil):
    dt = 0.002
    est = DerivativeEstimator(dt, tau_f=0.0, stencil=stencil)
    vel, acc = _feed(est, lambda t: np.array([t * t, -3 * t * t]), dt, 20)
    t_last = 19 * dt
    np.testing.assert_allclose(acc, [2.0, -6.0], atol=1e-6)
    np.testing.assert_allclose(vel, [2 * t_last, -6 * t_last], atol=1e-8)


def test_estimator_filtered_quadratic_converges():
    dt = 0.002
    est = DerivativeEstimator(dt, tau_f=0.02)
    _, acc = _feed(est, lambda t: np.array([t * t, t * t]), dt, 1000)
    np.testing.assert_allclose(acc, [2.0, 2.0], atol=1e-8)


def test_estimator_tracks_sine_within_lag():
    # accuracy on a smooth signal with the filter off; error scales with dt
    dt = 0.0005
    est = DerivativeEstimator(dt, tau_f=0.0)
    n = 4000
    _, acc = _feed(est, lambda t: np.array([np.sin(t), np.cos(t)]), dt, n)
    t = (n - 1) * dt
    np.testing.assert_allclose(acc, [-np.sin(t), -np.cos(t)], atol=1e-3)


def test_estimator_warmup():
    est = DerivativeEstimator(0.01, tau_f=0.0)
    for k in range(3):
        vel, acc = est.update([float(k * k), 0.0])
        assert not est.warmed_up
        np.testing.assert_array_equal(acc, 0.0)
    vel, acc = est.update([9.0, 0.0])
    assert est.warmed_up
    assert acc[0] != 0.0


def test_estimator_rejects_bad_args():
    with pytest.raises(ValueError):
        DerivativeEstimator(0.0)
    with pytest.raises(ValueError):
        DerivativeEstimator(0.01, tau_f=-1)
    with pytest.raises(ValueError):
        DerivativeEstimator(0.01, stencil=3)


# --- integral and anti-windup --------------------------------------------------

def test_update_integral_examples():
    np.testing.assert_allclose(update_integral([0.0, 1.0], [2.0, 3.0], 0.5, [False, False]), [1.0, 2.5])
    np.testing.assert_allclose(update_integral([0.0, 1.0], [2.0, 3.0], 0.5, [True, False]), [0.0, 2.5])
    with pytest.raises(ValueError):
        update_integral([0.0, 0.0], [1.0, 1.0], 0.0, [False, False])


def test_integral_stays_bounded_under_saturation():
    # a large pitch step with tight voltage limits drives the actuator into saturation
    sc = Scenario(duration=6.0, controller="lqr_pid", initial_state=dataclasses.replace(
        Scenario().initial_state, theta=-80 * DEG), params=dataclasses.replace(Scenario().params, u_p_max=6.0))
    trace = run_closed_loop(sc)
    clamped = np.abs(trace.u[:, 0]) >= sc.params.u_p_max - 1e-12
    assert clamped.any()
    # integral does not move during clamped ticks
    moved = np.abs(np.diff(trace.integral[:, 0])) > 0
    assert not np.any(moved & clamped[:-1])
    assert np.max(np.abs(trace.integral[:, 0])) < 2.0


# --- F estimation in closed loop --------------------------------------------

def test_true_F_matches_acceleration_identity(model):
    x = np.array([0.1, -0.2, 0.3, 0.4, 0.0, 0.0])
    u = np.array([2.0, -1.0])
    y_ddot = (model.A @ x + model.B @ u)[2:4]
    np.testing.assert_allclose(true_F(model, x, u, CFG) + CFG.alpha * u, y_ddot, atol=1e-12)


def test_oracle_law_solves_algebraic_loop(model, printed_gains):
    x = np.array([0.1, -0.2, 0.3, 0.4, 0.05, -0.01])
    e, e_dot, e_int = x[:2] - 0.05, x[2:4], x[4:6]
    u, F = oracle_ilqr_pid_control(model, x, np.zeros(2), printed_gains, e, e_dot, e_int, CFG)
    np.testing.assert_allclose(F, true_F(model, x, u, CFG), atol=1e-12)
    np.testing.assert_allclose(u, ilqr_pid_control(F, np.zeros(2), printed_gains, e, e_dot, e_int, CFG),
                               atol=1e-10)


def test_F_hat_tracks_true_F_on_nominal_run():
    sc = Scenario(duration=20.0)
    trace = run_closed_loop(sc)
    plant_model = build_linear_model(sc.params)
    F_true = np.array([true_F(plant_model, trace.x[k], trace.u[k - 1], CFG) for k in range(1, len(trace))])
    F_hat = trace.F_hat[1:]
    t = trace.t[1:]
    for lo, hi in ((1.0, 10.0), (11.0, 20.0)):
        w = (t >= lo) & (t <= hi)
        diff = np.sqrt(np.mean((F_hat[w] - F_true[w]) ** 2, axis=0))
        scale = np.sqrt(np.mean(F_true[w] ** 2, axis=0))
        assert np.all(diff <= 0.1 * scale + 1e-6), (lo, hi, diff, scale)


def test_pid_gains_is_plain_container():
    g = PidGains(np.eye(2), 2 * np.eye(2), 3 * np.eye(2))
    assert g.as_matrix().shape == (2, 6)
