import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from c2flow.errors import DivergenceError, DomainError
from c2flow.logistic import (LogisticParams, Trajectory, attractors, c2_fixed_point,
                             c2_logistic, carleman_k_logistic, compare_expansions,
                             euler_logistic, exact_unforced, filter_residual, time_average)


def params(g2):
    return LogisticParams.from_g2(g2, b=1.0, f=1.0)


def test_params_derived_quantities():
    p = params(0.1)
    assert p.a == pytest.approx(math.sqrt(10))
    assert p.g2 == pytest.approx(0.1)
    assert p.capacity == pytest.approx(math.sqrt(10))
    with pytest.raises(DomainError):
        LogisticParams(a=-1, b=1, f=1)


def test_attractors_closed_form_g2_01():
    p = params(0.1)
    stable, unstable = attractors(p)
    a = math.sqrt(10)
    assert stable == pytest.approx(a / 2 * (1 - math.sqrt(0.6)), rel=1e-14)
    assert unstable == pytest.approx(a / 2 * (1 + math.sqrt(0.6)), rel=1e-14)
    assert stable == pytest.approx(0.356394, abs=1e-6)
    # independent check: long Euler integration settles on the stable root
    traj = euler_logistic(0.0, p, 1e-3, 20000)
    assert traj.final[0] == pytest.approx(stable, abs=1e-12)


def test_attractors_unforced():
    p = LogisticParams(a=2.0, b=0.5, f=0.0)
    assert attractors(p) == pytest.approx((0.0, 4.0))


def test_attractors_merge_at_half_capacity():
    a, b = 1.0, 1.0
    for eps in (1e-4, 1e-8, 1e-12):
        f = (0.25 - eps) * a * a / b
        s, u = attractors(LogisticParams(a, b, f))
        assert s == pytest.approx(a / (2 * b), abs=3 * math.sqrt(eps))
        assert u == pytest.approx(a / (2 * b), abs=3 * math.sqrt(eps))


def test_attractors_runaway_regime():
    with pytest.raises(DomainError):
        attractors(LogisticParams(1.0, 1.0, 0.25))


def test_stable_root_is_rhs_zero():
    for g2 in np.linspace(0.01, 0.24, 12):
        p = params(g2)
        assert abs(p.rhs(attractors(p)[0])) < 1e-12 * p.a


@pytest.mark.parametrize("g2, expected", [(0.1, 0.3513641844631533), (0.2, 0.5590169943749475)])
def test_c2_fixed_point(g2, expected):
    # (1/sqrt(1/g2)) / (1 - g2) with b = f = 1, evaluated by hand
    assert c2_fixed_point(params(g2)) == pytest.approx(expected, rel=1e-14)


def test_c2_fixed_point_linear_limit_and_pole():
    p = LogisticParams(a=2.0, b=1.0, f=1e-9)
    assert c2_fixed_point(p) == pytest.approx(p.f / p.a, rel=1e-8)
    with pytest.raises(DomainError):
        c2_fixed_point(LogisticParams(a=1.0, b=1.0, f=1.0))


def test_euler_fixed_point_is_constant():
    p = params(0.1)
    xs = attractors(p)[0]
    traj = euler_logistic(xs, p, 0.01, 200)
    np.testing.assert_allclose(traj.component(0), xs, rtol=0, atol=1e-14)


def test_euler_converges_g2_01():
    p = params(0.1)
    traj = euler_logistic(0.0, p, 0.01, 700)
    assert len(traj) == 701
    assert abs(traj.final[0] - attractors(p)[0]) < 1e-6


def test_euler_diverges_beyond_repeller():
    p = LogisticParams(a=1.0, b=1.0, f=0.0)
    with pytest.raises(DivergenceError) as info:
        euler_logistic(1.5, p, 0.01, 10000)
    assert info.value.step > 0


def test_c2_constant_at_fixed_point():
    p = params(0.1)
    x1 = c2_fixed_point(p)
    traj = c2_logistic(x1, p, 0.01, 300, x2_0=p.f * x1 / p.a)
    np.testing.assert_allclose(traj.values, np.broadcast_to(traj.values[0], traj.values.shape),
                               rtol=0, atol=1e-14)


def test_c2_converges_g2_005():
    p = params(0.05)
    traj = c2_logistic(0.0, p, 0.01, 700)
    assert abs(traj.final[0] - c2_fixed_point(p)) < 1e-6


def test_c2_unforced_decays():
    p = LogisticParams(a=1.0, b=1.0, f=0.0)
    traj = c2_logistic(0.4, p, 0.01, 3000)
    assert abs(traj.final[0]) < 1e-10


def test_c2_initial_state_is_lifted():
    traj = c2_logistic(0.3, params(0.1), 0.01, 1)
    assert tuple(traj.values[0]) == (0.3, 0.09)


def test_carleman_k1_is_exponential():
    a, dt = 1.5, 0.01
    traj = carleman_k_logistic(0.7, a, 1.0, 1, dt, 100)
    np.testing.assert_allclose(traj.component(0), 0.7 * (1 - a * dt) ** np.arange(101),
                               rtol=1e-13)


def test_carleman_decoupled_when_b_zero():
    a, dt, x0 = 1.0, 0.01, 0.5
    traj = carleman_k_logistic(x0, a, 0.0, 3, dt, 50)
    t = np.arange(51)
    for k in (1, 2, 3):
        np.testing.assert_allclose(traj.component(k - 1), x0**k * (1 - k * a * dt) ** t,
                                   rtol=1e-13)


def test_carleman_error_decreases_with_order():
    a = b = 1.0
    x0, dt, steps = 0.3, 1e-4, 20000
    t = dt * np.arange(steps + 1)
    exact = exact_unforced(x0, a, b, t)
    errs = [np.abs(carleman_k_logistic(x0, a, b, k, dt, steps).component(0) - exact).max()
            for k in (2, 3, 4)]
    assert errs[0] > errs[1] > errs[2]


def test_carleman_k2_matches_c2_construction():
    for f in (0.0, 0.4):
        p = LogisticParams(a=1.3, b=0.7, f=f)
        ref = c2_logistic(0.2, p, 0.01, 400)
        got = carleman_k_logistic(0.2, p.a, p.b, 2, 0.01, 400, f=f)
        np.testing.assert_array_equal(got.values, ref.values)


def test_time_average_identity_and_constant():
    traj = Trajectory(0.01, np.sin(np.arange(100) * 0.01))
    np.testing.assert_array_equal(time_average(traj, 0).values, traj.values)
    const = Trajectory(0.01, np.full(100, 2.5))
    out = time_average(const, 0.1)
    assert len(out) == 100 - 20
    np.testing.assert_allclose(out.values, 2.5, rtol=1e-14)
    assert out.t0 == pytest.approx(0.1)


@pytest.mark.parametrize("dt", [0.01, 0.005])
def test_time_average_full_period_vanishes(dt):
    omega = 2 * math.pi
    tau = math.pi / omega
    n = int(round(3 / dt)) + 1
    traj = Trajectory(dt, np.sin(omega * dt * np.arange(n)))
    out = time_average(traj, tau)
    # trapezoid over an exact period of a trigonometric polynomial is exact
    assert np.abs(out.values).max() < 1e-12


def test_time_average_window_errors():
    traj = Trajectory(0.1, np.zeros(5))
    with pytest.raises(DomainError):
        time_average(traj, 0.3)
    with pytest.raises(DomainError):
        time_average(traj, 0.15)


def _exact_traj(dt, a=1.0, b=1.0, x0=0.3, t_end=3.0):
    n = int(round(t_end / dt)) + 1
    return Trajectory(dt, exact_unforced(x0, a, b, dt * np.arange(n)))


@pytest.mark.parametrize("k", [1, 2])
def test_filter_residual_small_on_exact_samples(k):
    r = filter_residual(_exact_traj(0.005), k, 0.2, 1.0, 1.0)
    assert r < 1e-3


def test_filter_residual_linear_case():
    dt, a = 0.01, 1.0
    traj = _exact_traj(dt, a=a, b=0.0)
    r = filter_residual(traj, 1, 0.1, a, 0.0)
    # centered-difference and trapezoid errors of an exponential, both O(dt^2)
    assert r < 0.3 * 0.3 * dt**2 * 10


def test_filter_residual_tau0_is_centered_defect():
    dt, a, b = 0.01, 1.0, 1.0
    traj = _exact_traj(dt)
    x = traj.component(0)
    defect = (x[2:] - x[:-2]) / (2 * dt) - (-a * x[1:-1] + b * x[1:-1] ** 2)
    assert filter_residual(traj, 1, 0.0, a, b) == pytest.approx(np.abs(defect).max(), rel=1e-12)


def test_compare_expansions_values():
    e, c = compare_expansions(0.05)
    assert e == pytest.approx((1 - math.sqrt(0.8)) / 0.1, rel=1e-13)
    assert e == pytest.approx(1.055728, abs=1e-6)
    assert c == pytest.approx(1 / 0.95, rel=1e-15)
    assert abs(e - c) / 0.05**2 == pytest.approx(1.24, abs=0.01)
    e, c = compare_expansions(0.2)
    assert e == pytest.approx(1.381966, abs=1e-6)
    assert c == pytest.approx(1.25)
    e, c = compare_expansions(1e-9)
    assert e == pytest.approx(1.0, abs=1e-8) and c == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DomainError):
        compare_expansions(0.25)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-4, 0.2499))
def test_c2_underestimates_exact(g2):
    p = params(g2)
    lin = p.f / p.a
    c2 = c2_fixed_point(p)
    xs = attractors(p)[0]
    assert lin <= c2 * (1 + 1e-15) and c2 <= xs * (1 + 1e-15)


@pytest.mark.parametrize("x0", [0.0, 0.2, 0.5])
def test_c2_reaches_fixed_point_from_basin(x0):
    p = params(0.1)
    traj = c2_logistic(x0, p, 0.01, 3000)
    assert traj.final[0] == pytest.approx(c2_fixed_point(p), abs=1e-12)
