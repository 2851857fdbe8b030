from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapspin.diagnostics import (CSV_COLUMNS, SUMMARY_KEYS, TimeSeries, angular_momentum_quadrature,
                                 decay_fit, energy_residual, kinetic_energy,
                                 kinetic_energy_quadrature, late_window, momentum_invariant,
                                 relaxed_energy, stability_probe, summarize, write_summary)
from gapspin.errors import ParameterError
from gapspin.galerkin import State, initial_state
from gapspin.integrator import IntegratorConfig, default_dt, integrate
from gapspin.operators import WeightedProducts


@pytest.fixture(scope="module")
def run(tri0):
    sys = tri0.system
    s0 = initial_state(sys, sys.rigid_projection @ np.array([0.0, 0.0, -2.0]), [0.0, 0.0, 1.0])
    dt = default_dt(sys)
    traj = integrate(sys, s0, IntegratorConfig(dt, 2000 * dt, output_every=10))
    return sys, s0, TimeSeries.from_trajectory(sys, traj)


@settings(max_examples=30)
@given(rate=st.floats(0.01, 5.0), amp=st.floats(1e-3, 1e3), t1=st.floats(1.0, 5.0))
def test_decay_fit_recovers_exponential(rate, amp, t1):
    t = np.linspace(0.0, t1, 50)
    fit = decay_fit(t, amp * np.exp(-rate * t), floor=0.0)
    assert fit.rate == pytest.approx(rate, rel=1e-9)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.samples == 50


def test_decay_fit_constant_series():
    fit = decay_fit(np.arange(10.0), np.full(10, 3.0))
    assert fit.rate == 0.0 and fit.r2 == 1.0


def test_decay_fit_floor_and_window():
    t = np.arange(10.0)
    y = np.exp(-t)
    y[6:] = 0.0
    fit = decay_fit(t, y)
    assert fit.samples == 6 and fit.rate == pytest.approx(1.0)
    assert decay_fit(t, y, window=(2.0, 4.0)).samples == 3
    with pytest.raises(ParameterError):
        decay_fit(t, y, window=(5.0, 20.0))
    assert np.isnan(decay_fit(t, np.zeros(10)).rate)
    assert late_window(t, np.exp(-t), 0.5) == (4.5, 9.0)


def test_kinetic_energy_by_quadrature(tri0):
    sys = tri0.system
    P = WeightedProducts(tri0.model, tri0.space.full)
    rng = np.random.default_rng(2)
    for _ in range(5):
        s = State(rng.standard_normal(sys.n), rng.standard_normal(3))
        assert kinetic_energy_quadrature(s, tri0.basis, P) == pytest.approx(
            kinetic_energy(s, sys), rel=1e-9)


def test_angular_momentum_by_quadrature(tri0):
    sys = tri0.system
    rng = np.random.default_rng(3)
    for _ in range(5):
        s = State(rng.standard_normal(sys.n), rng.standard_normal(3))
        A = angular_momentum_quadrature(s, sys, tri0.basis, tri0.model)
        assert np.allclose(A, sys.I @ s.Omega, atol=1e-10 * np.abs(A).max())
        assert momentum_invariant(s, sys) == pytest.approx(np.linalg.norm(A), rel=1e-10)


def test_time_series_identities(run):
    sys, s0, ts = run
    assert ts.KE_total[0] == pytest.approx(kinetic_energy(s0, sys))
    assert energy_residual(ts).max() < 1e-6 * ts.KE_total[0]
    assert np.ptp(ts.A_norm) < 1e-10 * ts.A_norm[0]
    assert np.allclose(ts.omega1[0], [0.0, 0.0, 1.0], atol=1e-14)
    assert np.all(ts.dissipation >= 0)
    assert np.all(np.diff(ts.dissipated) >= 0)
    assert np.allclose(ts.omega2 - ts.omega1, ts.omega)


def test_csv_layout(run):
    _, _, ts = run
    text = ts.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == len(ts) + 1
    back = np.array(rows[1:], dtype=float)
    assert np.array_equal(back, ts.rows())


def test_summary(run, tmp_path):
    _, _, ts = run
    summ = summarize(ts)
    assert set(summ) == set(SUMMARY_KEYS)
    assert summ["A_drift_rel"] < 1e-10 and summ["decay_rate"] > 0
    write_summary(summ, tmp_path / "s.json")
    assert json.loads((tmp_path / "s.json").read_text()) == summ


def test_relaxed_energy_vanishes_for_rigid_rotation(sph0):
    sys = sph0.system
    s = State(np.zeros(sys.n), np.array([0.0, 0.0, 1.0]))
    traj = integrate(sys, s, IntegratorConfig(0.1, 1.0))
    ts = TimeSeries.from_trajectory(sys, traj)
    assert np.abs(relaxed_energy(ts, sys)).max() < 1e-14


def test_stability_probe_zero_delta(tri0):
    rep = stability_probe(tri0.system, State.zero(tri0.system.n), 0.0, 1.0)
    assert np.all(rep.ratios == 1.0) and rep.max_ratio == 1.0
    with pytest.raises(ParameterError):
        stability_probe(tri0.system, State.zero(tri0.system.n), -1.0, 1.0)


def test_stability_probe_near_rest_scales_linearly(tri0):
    sys = tri0.system
    s0 = State.zero(sys.n)
    r1 = stability_probe(sys, s0, 1e-6, 2.0, count=3)
    r2 = stability_probe(sys, s0, 2e-6, 2.0, count=3)
    # linearised flow: ratios independent of the perturbation size
    assert np.allclose(r1.ratios, r2.ratios, rtol=1e-4)
    # rest is Lyapunov stable: no ratio exceeds one in the energy-weighted sense
    assert r1.max_ratio < 10.0
