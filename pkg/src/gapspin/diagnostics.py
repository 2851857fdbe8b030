"""Energy, momentum and decay diagnostics over integrated trajectories."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .fem import MATRIX_ORDER, tabulate
from .galerkin import GalerkinSystem, State, reconstruct_field, reconstruct_velocities
from .integrator import IntegratorConfig, Trajectory, default_dt, integrate
from .operators import WeightedProducts

CSV_COLUMNS = ("t", "KE_total", "E_tilde", "dissipation", "A_norm", "v_l2",
               "Omega_x", "Omega_y", "Omega_z", "omega1_x", "omega1_y", "omega1_z",
               "omega_x", "omega_y", "omega_z", "omegaR_x", "omegaR_y", "omegaR_z")
SUMMARY_KEYS = ("decay_rate", "decay_r2", "A_drift_rel", "energy_residual_max",
                "final_v_l2_rel", "final_omega_rel")
FLOOR = 1e-14


@dataclass(eq=False)
class TimeSeries:
    t: np.ndarray
    c: np.ndarray  # (ns, n)
    Omega: np.ndarray  # (ns, 3)
    omega1: np.ndarray
    omega2: np.ndarray
    omega: np.ndarray
    omega_R: np.ndarray
    E_tilde: np.ndarray
    KE_total: np.ndarray
    dissipation: np.ndarray  # c.a.c = 2 mu |D|^2
    A_norm: np.ndarray
    v_l2: np.ndarray
    dissipated: np.ndarray  # int_0^t 2 * dissipation

    def __len__(self):
        return len(self.t)

    @classmethod
    def from_trajectory(cls, sys: GalerkinSystem, traj: Trajectory) -> "TimeSeries":
        y = traj.y
        c, Om = y[:, : sys.n], y[:, sys.n:]
        wR = c @ sys.betas.T
        w1 = Om + wR
        w = c @ sys.mode_omegas.T
        E = np.einsum("sp,sp->s", c, c)
        IOm = Om @ sys.I.T
        KE = E + np.einsum("si,si->s", Om, IOm)
        diss = np.einsum("sp,pr,sr->s", c, sys.a, c)
        vl2 = np.sqrt(np.maximum(np.einsum("sp,pq,sq->s", c, sys.liquid_gram, c), 0.0))
        return cls(traj.t.copy(), c, Om, w1, w1 + w, w, wR, E, KE, diss,
                   np.linalg.norm(IOm, axis=1), vl2, traj.dissipated.copy())

    def rows(self):
        cols = [self.t, self.KE_total, self.E_tilde, self.dissipation, self.A_norm, self.v_l2,
                *self.Omega.T, *self.omega1.T, *self.omega.T, *self.omega_R.T]
        return np.column_stack(cols)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows():
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def kinetic_energy(s: State, sys: GalerkinSystem) -> float:
    """E(v_n) + Omega.I.Omega, with E = |c|^2 for a B-orthonormal basis."""
    c, Om = np.asarray(s.c, dtype=float), np.asarray(s.Omega, dtype=float)
    return float(c @ c + Om @ sys.I @ Om)


def kinetic_energy_quadrature(s: State, basis, products: WeightedProducts) -> float:
    """Same quantity from the reconstructed field and the weighted products."""
    Om = np.asarray(s.Omega, dtype=float)
    return products.energy(reconstruct_field(basis, s)) + float(Om @ products.model.I @ Om)


def momentum_invariant(s: State, sys: GalerkinSystem) -> float:
    return float(np.linalg.norm(sys.I @ np.asarray(s.Omega, dtype=float)))


def angular_momentum_quadrature(s: State, sys: GalerkinSystem, basis, model) -> np.ndarray:
    """rho int_L x cross u + I_B omega1 + lam omega2, with u = v + omega1 x x, by quadrature."""
    w1, w2, _, _ = reconstruct_velocities(sys, s)
    fs = basis.space.full
    field = reconstruct_field(basis, s)
    tab = tabulate(fs.mesh, MATRIX_ORDER)
    vals, _ = fs.evaluate(field.v_dofs, tab)
    x = tab.points
    u = vals + np.cross(w1, x)
    liquid = model.rho * np.einsum("tq,tqi->i", tab.weights, np.cross(x, u))
    return liquid + model.I_B @ w1 + model.lam * w2


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r2: float
    window: tuple
    samples: int


def decay_fit(t, y, window=None, floor=FLOOR) -> DecayFit:
    """Least-squares slope of log(y) over ``window``; the rate is minus the slope.

    Samples at or below ``floor`` truncate the window.  A constant series
    gives rate 0 and r2 1.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = (t[0], t[-1]) if window is None else window
    if lo > hi or lo < t[0] - 1e-12 or hi > t[-1] + 1e-12:
        raise ParameterError(f"window {window} outside series [{t[0]}, {t[-1]}]")
    sel = (t >= lo) & (t <= hi)
    tt, yy = t[sel], y[sel]
    below = np.flatnonzero(yy <= floor)
    if len(below):
        tt, yy = tt[: below[0]], yy[: below[0]]
    if len(tt) < 2:
        return DecayFit(float("nan"), float("nan"), (float(lo), float(hi)), len(tt))
    ly = np.log(yy)
    if np.ptp(ly) <= 1e-15 * max(1.0, float(np.abs(ly).max())):
        return DecayFit(0.0, 1.0, (float(tt[0]), float(tt[-1])), len(tt))
    slope, icpt = np.polyfit(tt, ly, 1)
    ss_res = float(np.sum((ly - (slope * tt + icpt)) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot
    return DecayFit(float(-slope), r2, (float(tt[0]), float(tt[-1])), len(tt))


def energy_residual(ts: TimeSeries):
    """|KE(t) - KE(0) + int_0^t 4 mu |D|^2| at every sample."""
    return np.abs(ts.KE_total - ts.KE_total[0] + ts.dissipated)


def relaxed_energy(ts: TimeSeries, sys: GalerkinSystem):
    """KE_total minus its rigid-rotation limit |A|^2 / iota (isotropic I only)."""
    iota = float(np.mean(np.diag(sys.I)))
    return ts.KE_total - ts.A_norm[0] ** 2 / iota


def _rel(final, initial):
    if initial == 0:
        return 0.0 if final == 0 else float("inf")
    return float(final / initial)


def late_window(t, y, fraction=0.5, floor=FLOOR):
    """Last ``fraction`` of the span over which ``y`` stays above ``floor``."""
    above = np.flatnonzero(np.asarray(y) > floor)
    end = t[above[-1]] if len(above) else t[0]
    return float(end - fraction * (end - t[0])), float(end)


def summarize(ts: TimeSeries, window_fraction=0.5) -> dict:
    """JSON-ready summary; the decay fit covers the late part of the above-floor span."""
    fit = decay_fit(ts.t, ts.E_tilde, late_window(ts.t, ts.E_tilde, window_fraction))
    A0 = ts.A_norm[0]
    drift = float(np.max(np.abs(ts.A_norm - A0)) / A0) if A0 > 0 else float(np.max(ts.A_norm))
    KE0 = ts.KE_total[0]
    res = energy_residual(ts)
    w = np.linalg.norm(ts.omega, axis=1)
    out = {
        "decay_rate": fit.rate,
        "decay_r2": fit.r2,
        "A_drift_rel": drift,
        "energy_residual_max": float(res.max() / KE0) if KE0 > 0 else float(res.max()),
        "final_v_l2_rel": _rel(ts.v_l2[-1], ts.v_l2[0]),
        "final_omega_rel": _rel(w[-1], w[0]),
    }
    return {k: (v if np.isfinite(v) else None) for k, v in out.items()}


def write_summary(summary: dict, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class StabilityReport:
    delta: float
    ratios: np.ndarray

    @property
    def max_ratio(self):
        return float(np.max(self.ratios))


def stability_probe(sys: GalerkinSystem, s0: State, delta, t_end, dt=None, count=10,
                    seed=0) -> StabilityReport:
    """Final-to-initial distance ratio for ``count`` random perturbations of size ``delta``."""
    if delta < 0:
        raise ParameterError(f"delta must be nonnegative, got {delta}")
    if delta == 0:
        return StabilityReport(0.0, np.ones(count))
    cfg = IntegratorConfig(dt=dt or default_dt(sys), t_end=t_end, energy_guard=None,
                           output_every=10**9)
    base = integrate(sys, s0, cfg).y[-1]
    rng = np.random.default_rng(seed)
    y0 = s0.pack()
    ratios = []
    for _ in range(count):
        e = rng.standard_normal(len(y0))
        e *= delta / np.linalg.norm(e)
        end = integrate(sys, State.unpack(y0 + e), cfg).y[-1]
        ratios.append(np.linalg.norm(end - base) / delta)
    return StabilityReport(float(delta), np.array(ratios))
