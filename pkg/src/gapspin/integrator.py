"""Explicit time integration of the reduced system and the rigid-body oracle."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BlowUpError, InvariantError, ParameterError
from .galerkin import GalerkinSystem, State, euler_system, rhs_packed

log = logging.getLogger(__name__)

METHODS = ("rk4", "rk45-adaptive")


@dataclass(frozen=True)
class IntegratorConfig:
    """Time stepping parameters.

    ``dt`` is the fixed step for ``rk4`` and the initial step for the adaptive
    scheme.  ``energy_guard`` bounds the per-step residual of the energy
    identity relative to the initial energy; ``None`` disables the check.
    ``output_every`` is the number of accepted steps between stored samples.
    """

    dt: float
    t_end: float
    method: str = "rk4"
    rtol: float = 1e-9
    atol: float = 1e-12
    energy_guard: float | None = 1e-8
    output_every: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > 0 and np.isfinite(self.t_end)):
            raise ParameterError(f"t_end must be positive, got {self.t_end}")
        if self.method not in METHODS:
            raise ParameterError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.output_every < 1:
            raise ParameterError("output_every must be >= 1")

    def to_dict(self):
        return asdict(self)


def default_dt(sys: GalerkinSystem):
    """0.1 / sigma_max: well inside the RK4 stability interval [-2.78, 0] of the stiffest mode."""
    if sys.n == 0:
        return 1e-2
    return 0.1 / float(np.max(sys.sigmas))


@dataclass
class Trajectory:
    """Raw integrator output: packed states and the accumulated dissipation.

    ``dissipated[k]`` is the integral of 2 c.a.c from 0 to ``t[k]`` (that is,
    of 4 mu |D|^2), evaluated with the same Runge-Kutta weights as the step.
    """

    t: np.ndarray
    y: np.ndarray  # (ns, n + 3)
    dissipated: np.ndarray
    n: int
    steps: int = 0
    rejected: int = 0

    def state(self, k) -> State:
        return State.unpack(self.y[k])


def _aug_rhs(sys, z):
    # last entry integrates the energy sink 2 c.a.c alongside the state
    y = z[:-1]
    c = y[: sys.n]
    return np.concatenate([rhs_packed(sys, y), [2.0 * c @ sys.a @ c]])


def _check_finite(z, t):
    if not np.all(np.isfinite(z)):
        raise BlowUpError(f"non-finite state at t={t:.6g}", t=t,
                          state_norm=float(np.linalg.norm(np.nan_to_num(z[:-1], nan=np.inf))))


def _rk4(sys, z, dt):
    k1 = _aug_rhs(sys, z)
    k2 = _aug_rhs(sys, z + 0.5 * dt * k1)
    k3 = _aug_rhs(sys, z + 0.5 * dt * k2)
    k4 = _aug_rhs(sys, z + dt * k3)
    return z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(sys: GalerkinSystem, s: State, dt) -> State:
    """One classical RK4 step."""
    z = np.concatenate([s.pack(), [0.0]])
    z1 = _rk4(sys, z, dt)
    _check_finite(z1, dt)
    return State.unpack(z1[:-1])


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100,
                   1 / 40])


def _dp_step(sys, z, dt):
    ks = []
    for i in range(7):
        zi = z + dt * sum(a * k for a, k in zip(_DP_A[i], ks)) if i else z
        ks.append(_aug_rhs(sys, zi))
    K = np.array(ks)
    return z + dt * (_DP_B5 @ K), dt * ((_DP_B5 - _DP_B4) @ K)


def _momentum(sys, z):
    return float(np.linalg.norm(sys.I @ z[sys.n: sys.n + 3]))


def integrate(sys: GalerkinSystem, s0: State, cfg: IntegratorConfig) -> Trajectory:
    """Advance ``s0`` to ``cfg.t_end``, storing every ``output_every``-th step."""
    z = np.concatenate([s0.pack(), [0.0]])
    if z.shape != (sys.n + 4,):
        raise ParameterError(f"initial state has {len(z) - 4} modes, system has {sys.n}")
    _check_finite(z, 0.0)
    E0 = _energy(sys, z)
    scale = max(E0, np.finfo(float).tiny)
    ts, ys, ds = [0.0], [z[:-1].copy()], [0.0]
    t = 0.0
    steps = rejected = 0
    dt = cfg.dt
    A0 = _momentum(sys, z)
    # remainders below this are round-off in t, not a step still to take
    eps_t = 1e-9 * cfg.dt
    while cfg.t_end - t > eps_t:
        if cfg.method == "rk4":
            # fixed-step times from the step count, so no round-off builds up in t
            t_next = (steps + 1) * cfg.dt
            if cfg.t_end - t_next <= eps_t:
                t_next = cfg.t_end
            h = t_next - t
            z1 = _rk4(sys, z, h)
        else:
            h = min(dt, cfg.t_end - t)
            if cfg.t_end - t - h <= eps_t:
                h = cfg.t_end - t
            z1, err = _dp_step(sys, z, h)
            tol = cfg.atol + cfg.rtol * np.maximum(np.abs(z), np.abs(z1))
            ratio = float(np.max(np.abs(err[:-1]) / tol[:-1])) if len(err) > 1 else 0.0
            # conservation control: |I Omega| must not drift beyond rtol
            drift = abs(_momentum(sys, z1) - A0) / max(A0, cfg.atol)
            ratio = max(ratio, drift / cfg.rtol)
            if not np.isfinite(ratio) or ratio > 1.0:
                rejected += 1
                dt = h * max(0.2, 0.9 * (ratio if np.isfinite(ratio) else 1e10) ** -0.2)
                if dt < 1e-14 * max(cfg.t_end, 1.0):
                    raise BlowUpError(f"step size underflow at t={t:.6g}", t=t,
                                      state_norm=float(np.linalg.norm(z[:-1])))
                continue
            dt = h * min(5.0, 0.9 * max(ratio, 1e-10) ** -0.2)
        _check_finite(z1, t + h)
        if cfg.energy_guard is not None:
            resid = abs(_energy(sys, z1) - _energy(sys, z) + (z1[-1] - z[-1]))
            if resid > cfg.energy_guard * scale:
                raise InvariantError(
                    f"energy identity residual {resid:.3e} exceeds guard at t={t + h:.6g}")
        z = z1
        t = t_next if cfg.method == "rk4" else t + h
        steps += 1
        done = cfg.t_end - t <= eps_t
        if done:
            t = cfg.t_end
        if steps % cfg.output_every == 0 or done:
            ts.append(t)
            ys.append(z[:-1].copy())
            ds.append(z[-1])
    log.info("integrated %d steps (%d rejected) to t=%.6g", steps, rejected, t)
    return Trajectory(np.array(ts), np.array(ys), np.array(ds), sys.n, steps, rejected)


def _energy(sys, z):
    c = z[: sys.n]
    Om = z[sys.n: sys.n + 3]
    return float(c @ c + Om @ sys.I @ Om)


def euler_top(I, Omega0, dt, t_end, output_every=1) -> Trajectory:
    """Torque-free rigid body I dOmega/dt + Omega x I Omega = 0 by RK4."""
    I = np.asarray(I, dtype=float)
    if I.shape != (3, 3) or np.any(np.abs(I - np.diag(np.diag(I))) > 0) or np.any(np.diag(I) <= 0):
        raise ParameterError("euler_top needs a positive diagonal 3x3 inertia tensor")
    cfg = IntegratorConfig(dt=dt, t_end=t_end, energy_guard=None, output_every=output_every)
    return integrate(euler_system(I), State(np.zeros(0), np.asarray(Omega0, dtype=float)), cfg)


def symmetric_top(I, Omega0, t):
    """Closed-form Omega(t) for I = diag(I1, I1, I3)."""
    I1, I3 = I[0][0], I[2][2]
    Om = np.asarray(Omega0, dtype=float)
    t = np.asarray(t, dtype=float)
    nu = (I3 - I1) * Om[2] / I1
    ct, st = np.cos(nu * t), np.sin(nu * t)
    return np.stack([Om[0] * ct - Om[1] * st, Om[0] * st + Om[1] * ct,
                     np.full_like(t, Om[2])], axis=-1)
