from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapspin.errors import BlowUpError, InvariantError, ParameterError
from gapspin.galerkin import State, euler_system, rhs
from gapspin.integrator import (IntegratorConfig, default_dt, euler_top, integrate, step,
                                symmetric_top)

SYM = np.diag([1.0, 1.0, 2.0])
OM0 = np.array([0.6, -0.3, 1.1])


def test_config_validation():
    for kw in ({"dt": 0.0}, {"dt": -1.0}, {"t_end": 0.0}, {"method": "euler"},
               {"output_every": 0}, {"dt": float("nan")}):
        args = {"dt": 0.1, "t_end": 1.0} | kw
        with pytest.raises(ParameterError):
            IntegratorConfig(**args)
    assert IntegratorConfig(0.1, 1.0).to_dict()["method"] == "rk4"


def test_default_dt(tri0):
    assert default_dt(tri0.system) == pytest.approx(0.1 / tri0.system.sigmas.max())
    assert default_dt(euler_system(SYM)) == 1e-2


def test_rest_stays_at_rest(tri0):
    sys = tri0.system
    tr = integrate(sys, State.zero(sys.n), IntegratorConfig(0.05, 5.0))
    assert np.all(tr.y == 0) and np.all(tr.dissipated == 0)


def test_symmetric_top_matches_closed_form():
    tr = euler_top(SYM, OM0, 1e-2, 20.0)
    exact = symmetric_top(SYM, OM0, tr.t)
    assert np.abs(tr.y - exact).max() < 1e-8


def test_closed_form_precession_rate():
    # nu = (I3 - I1) Omega3 / I1 = 1.1, so the transverse part returns after 2 pi / 1.1
    T = 2 * np.pi / 1.1
    assert np.allclose(symmetric_top(SYM, OM0, T), OM0, atol=1e-14)


@pytest.mark.parametrize("dt", [0.04, 0.02])
def test_fourth_order_convergence(dt):
    t_end = 4.0
    e_coarse = np.abs(euler_top(SYM, OM0, dt, t_end).y[-1] - symmetric_top(SYM, OM0, t_end)).max()
    e_fine = np.abs(euler_top(SYM, OM0, dt / 2, t_end).y[-1]
                    - symmetric_top(SYM, OM0, t_end)).max()
    assert e_coarse / e_fine == pytest.approx(16.0, rel=0.1)


def test_single_step_agrees_with_integrate(tri0):
    sys = tri0.system
    rng = np.random.default_rng(0)
    s = State(rng.standard_normal(sys.n), rng.standard_normal(3))
    dt = default_dt(sys)
    one = step(sys, s, dt)
    tr = integrate(sys, s, IntegratorConfig(dt, dt, energy_guard=None))
    assert np.array_equal(tr.y[-1], one.pack())


def test_integrate_without_modes_matches_euler_top():
    I = np.diag([1.0, 2.0, 3.0])
    cfg = IntegratorConfig(1e-2, 3.0, energy_guard=None)
    a = integrate(euler_system(I), State(np.zeros(0), OM0), cfg)
    b = euler_top(I, OM0, 1e-2, 3.0)
    assert np.array_equal(a.y, b.y)


def test_output_cadence(tri0):
    sys = tri0.system
    s = State(np.ones(sys.n) * 0.1, np.array([0.0, 0.0, 1.0]))
    dt = default_dt(sys)
    tr = integrate(sys, s, IntegratorConfig(dt, 100 * dt, output_every=10))
    assert tr.steps == 100 and len(tr.t) == 11
    full = integrate(sys, s, IntegratorConfig(dt, 100 * dt))
    assert np.array_equal(tr.y, full.y[::10])


def test_adaptive_method_agrees_with_rk4(tri0):
    sys = tri0.system
    s = State(0.2 * np.ones(sys.n), np.array([0.1, 0.0, 1.0]))
    fixed = integrate(sys, s, IntegratorConfig(default_dt(sys) / 4, 5.0))
    adapt = integrate(sys, s, IntegratorConfig(default_dt(sys), 5.0, method="rk45-adaptive",
                                               rtol=1e-10, atol=1e-13))
    assert adapt.t[-1] == pytest.approx(5.0, rel=1e-14)
    assert np.abs(adapt.y[-1] - fixed.y[-1]).max() < 1e-7
    A = [np.linalg.norm(sys.I @ adapt.state(k).Omega) for k in range(len(adapt.t))]
    assert np.ptp(A) / A[0] < 1e-9


def test_energy_guard_trips(tri0):
    sys = tri0.system
    s = State(np.ones(sys.n), np.array([0.0, 0.0, 1.0]))
    with pytest.raises(InvariantError):
        integrate(sys, s, IntegratorConfig(2.5 / sys.sigmas.max(), 10.0, energy_guard=1e-8))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blow_up_detected(tri0):
    sys = tri0.system
    s = State(np.ones(sys.n), np.array([0.0, 0.0, 1.0]))
    with pytest.raises(BlowUpError) as info:
        integrate(sys, s, IntegratorConfig(10.0 / sys.sigmas.max(), 1e4, energy_guard=None))
    assert info.value.t is not None


def test_state_size_mismatch(tri0):
    with pytest.raises(ParameterError):
        integrate(tri0.system, State(np.zeros(2), np.zeros(3)), IntegratorConfig(0.1, 1.0))


def test_euler_top_rejects_nondiagonal():
    with pytest.raises(ParameterError):
        euler_top(np.ones((3, 3)), OM0, 0.1, 1.0)


@settings(max_examples=15, deadline=None)
@given(om=st.lists(st.floats(-2, 2), min_size=3, max_size=3),
       I=st.lists(st.floats(0.5, 3.0), min_size=3, max_size=3))
def test_euler_first_integrals(om, I):
    I = np.diag(I)
    tr = euler_top(I, om, 2.5e-3, 5.0)
    E = np.einsum("ti,ij,tj->t", tr.y, I, tr.y)
    A = np.linalg.norm(tr.y @ I, axis=1)
    scale = 1 + np.max(np.abs(om)) ** 2
    assert np.ptp(E) <= 1e-8 * scale
    assert np.ptp(A) <= 1e-8 * scale


@settings(max_examples=20, deadline=None)
@given(axis=st.integers(0, 2), w=st.floats(-3, 3))
def test_principal_axis_rotations_are_fixed_points(axis, w):
    I = np.diag([1.0, 2.0, 3.0])
    om = np.zeros(3)
    om[axis] = w
    assert np.all(rhs(euler_system(I), State(np.zeros(0), om)).Omega == 0)
    tr = euler_top(I, om, 0.05, 10.0)
    assert np.all(tr.y == om)
