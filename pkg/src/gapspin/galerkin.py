"""Reduced ODE for the mode coefficients c and the momentum variable Omega.

With B-orthonormal modes w_p, ball angular velocities alpha_p and
beta_p = b(w_p), the system reads::

    dc_r/dt = -[a_pr c_p + b_pqr c_p c_q + d_ipr Omega_i c_p + f_ijr Omega_i Omega_j]
    I dOmega/dt = -[g_ijk Omega_i Omega_j + h_pjk c_p Omega_j]

(summation over repeated indices).  The viscous factor 2 mu lives inside
``a`` only, and convection is assembled in skew-symmetric form, so that
``d/dt [|c|^2 + Omega.I.Omega] = -2 c.a.c`` and ``|I Omega|`` is constant
along exact trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretization import ModeBasis, assemble_B_mass, assemble_dissipation, assemble_moments
from .errors import ParameterError
from .fem import CONVECTION_ORDER, MATRIX_ORDER, tabulate
from .inertia import InertiaModel
from .operators import ExtendedField, swirl_field

MAX_MODES = 64
_EYE = np.eye(3)


@dataclass(eq=False)
class GalerkinSystem:
    """Coefficient tensors of the reduced system plus what reconstruction needs."""

    a: np.ndarray  # (n, n)
    b: np.ndarray  # (n, n, n)
    d: np.ndarray  # (3, n, n)
    f: np.ndarray  # (3, 3, n)
    g: np.ndarray  # (3, 3, 3)
    h: np.ndarray  # (n, 3, 3)
    ell: np.ndarray  # (3,)
    I: np.ndarray
    I_inv: np.ndarray
    moments: np.ndarray  # (3, n) int rho_tilde x cross w_p
    mode_omegas: np.ndarray  # (3, n)
    liquid_gram: np.ndarray  # (n, n) rho int_L w_p . w_q
    sigmas: np.ndarray  # (n,)
    rigid_projection: np.ndarray = field(default=None)  # (n, 3) coefficients of swirl(e_j)
    mu: float = 0.0

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def betas(self):
        """(3, n) b(w_p) = -I^-1 m_p."""
        return -self.I_inv @ self.moments

    def arrays(self):
        return {k: getattr(self, k) for k in _ARRAY_FIELDS}


_ARRAY_FIELDS = ("a", "b", "d", "f", "g", "h", "ell", "I", "I_inv", "moments", "mode_omegas",
                 "liquid_gram", "sigmas", "rigid_projection")


@dataclass(frozen=True)
class State:
    c: np.ndarray
    Omega: np.ndarray

    @classmethod
    def zero(cls, n):
        return cls(np.zeros(n), np.zeros(3))

    def pack(self):
        return np.concatenate([self.c, self.Omega])

    @classmethod
    def unpack(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(y[:-3], y[-3:])


def euler_tensors(I):
    """g_ijk = e_k.(e_i x I e_j), so g_ijk Omega_i Omega_j = (Omega x I Omega)_k."""
    I = np.asarray(I, dtype=float)
    return np.einsum("kab,ia,bj->ijk", _levi_civita(), _EYE, I)


def _levi_civita():
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    return eps


def _chunks(space, U, order, chunk):
    """Yield (values (n, 3, m), gradients (n, 3, 3, m), weights (m,)) over tet chunks.

    Gradient index order is [component i, derivative j].
    """
    mesh = space.mesh
    n = U.shape[0]
    for start in range(0, mesh.n_tets, chunk):
        tets = np.arange(start, min(start + chunk, mesh.n_tets))
        tab = tabulate(mesh, order, tets)
        vals, grads = space.evaluate(U, tab, tets)
        m = vals.shape[1] * vals.shape[2]
        V = np.ascontiguousarray(vals.reshape(n, m, 3).transpose(0, 2, 1))
        G = np.ascontiguousarray(grads.reshape(n, m, 3, 3).transpose(0, 2, 3, 1))
        yield V, G, tab.weights.reshape(m)


def _trilinear(a, b, c):
    """sum_m a[p, m] b[q, m] c[r, m] as an (n, n, n) array."""
    n, m = a.shape
    return ((a[:, None, :] * b[None, :, :]).reshape(n * n, m) @ c.T).reshape(n, n, n)


def _coriolis_tensor(space, full, alphas, rho, lam, chunk):
    """C_ipr = 2 (e_i x w_p, w_r) with the exact rigid term for the ball."""
    n = full.shape[1]
    cross = np.zeros((n, 3, n, 3))
    for V, _, w in _chunks(space, full.T, MATRIX_ORDER, chunk):
        flat = V.reshape(n * 3, -1)
        cross += ((flat * w) @ flat.T).reshape(n, 3, n, 3)
    eps = _levi_civita()
    C = 2.0 * rho * np.einsum("aij,pirj->apr", eps, cross)
    C += lam * np.einsum("aij,ip,jr->apr", eps, alphas, alphas)
    return C


def _convection_tensor(space, full, alphas, rho, lam, chunk):
    """T_pqr = (w_p . grad w_q, w_r) over the cavity."""
    n = full.shape[1]
    T = np.zeros((n, n, n))
    for V, G, w in _chunks(space, full.T, CONVECTION_ORDER, chunk):
        for j in range(3):
            Vj = V[:, j, :] * w
            for i in range(3):
                T += _trilinear(Vj, G[:, i, j, :], V[:, i, :])
    T *= rho
    # (alpha_p . grad)(alpha_q x x) = alpha_q x (alpha_p x x), integrated against alpha_r x x
    T += 0.5 * lam * np.einsum("aij,aq,ip,jr->pqr", _levi_civita(), alphas, alphas, alphas)
    return T


def assemble_tensors(basis: ModeBasis, model: InertiaModel, mu, chunk=256) -> GalerkinSystem:
    """All coefficient tensors of the reduced system for a B-orthonormal basis."""
    n = basis.n
    if n > MAX_MODES:
        raise ParameterError(f"at most {MAX_MODES} modes are supported, got {n}")
    space = basis.space
    fs = space.full
    X = basis.coeffs
    full = basis.full
    alphas = basis.omegas
    I, I_inv = np.asarray(model.I), np.asarray(model.I_inv)

    A = assemble_dissipation(space, mu)
    a = X.T @ (A @ X)
    a = 0.5 * (a + a.T)
    K = assemble_moments(space, model)
    moments = K.T @ X
    betas = -I_inv @ moments
    liquid_gram = model.rho * (full.T @ (fs.mass @ full))
    liquid_gram = 0.5 * (liquid_gram + liquid_gram.T)

    C = _coriolis_tensor(fs, full, alphas, model.rho, model.lam, chunk)
    C = 0.5 * (C - C.transpose(0, 2, 1))
    T = _convection_tensor(fs, full, alphas, model.rho, model.lam, chunk)
    N = 0.5 * (T - T.transpose(0, 2, 1))

    eps = _levi_civita()
    b = N + np.einsum("ip,iqr->pqr", betas, C)
    # e_i . I (beta_p x beta_r)
    IB = np.einsum("ia,ajk,jp,kr->ipr", I, eps, betas, betas)
    d = C - IB
    g = euler_tensors(I)
    # f_ijr = beta_r . (e_i x I e_j) = sum_k g_ijk beta_k,r
    f = np.einsum("ijk,kr->ijr", g, betas)
    # h_pjk = e_k . (beta_p x I e_j)
    h = np.einsum("kab,ap,bj->pjk", eps, betas, I)

    sys = GalerkinSystem(a=a, b=b, d=d, f=f, g=g, h=h, ell=np.diag(I).copy(), I=I.copy(),
                         I_inv=I_inv.copy(), moments=moments, mode_omegas=alphas.copy(),
                         liquid_gram=liquid_gram, sigmas=basis.sigmas.copy(), mu=float(mu))
    sys.rigid_projection = rigid_projection(basis, model)
    return sys


def rigid_projection(basis: ModeBasis, model: InertiaModel, mass=None):
    """(n, 3): column j holds the mode coefficients of the projected swirl of e_j."""
    space = basis.space
    MB = mass if mass is not None else assemble_B_mass(space, model)
    cols = []
    for j in range(3):
        U = swirl_field(space.full, _EYE[j])
        x = space.restrict(ExtendedField(U, _EYE[j].copy()))
        cols.append(basis.coeffs.T @ (MB @ x))
    return np.stack(cols, axis=1) if cols[0].size else np.zeros((basis.n, 3))


def euler_system(I) -> GalerkinSystem:
    """Reduced system with no fluid modes: Euler's rigid-body equations."""
    I = np.asarray(I, dtype=float)
    z = np.zeros
    return GalerkinSystem(a=z((0, 0)), b=z((0, 0, 0)), d=z((3, 0, 0)), f=z((3, 3, 0)),
                          g=euler_tensors(I), h=z((0, 3, 3)), ell=np.diag(I).copy(), I=I.copy(),
                          I_inv=np.linalg.inv(I), moments=z((3, 0)), mode_omegas=z((3, 0)),
                          liquid_gram=z((0, 0)), sigmas=z(0), rigid_projection=z((0, 3)))


def rhs(sys: GalerkinSystem, s: State) -> State:
    c, Om = np.asarray(s.c, dtype=float), np.asarray(s.Omega, dtype=float)
    if c.shape != (sys.n,) or Om.shape != (3,):
        raise ParameterError(f"state shape ({c.shape}, {Om.shape}) does not match n={sys.n}")
    n = sys.n
    cc = np.outer(c, c).ravel()
    oo = np.outer(Om, Om).ravel()
    dc = -(sys.a.T @ c
           + cc @ sys.b.reshape(n * n, n)
           + c @ (Om @ sys.d.reshape(3, n * n)).reshape(n, n)
           + oo @ sys.f.reshape(9, n))
    torque = oo @ sys.g.reshape(9, 3) + np.outer(c, Om).ravel() @ sys.h.reshape(3 * n, 3)
    return State(dc, -sys.I_inv @ torque)


def rhs_packed(sys: GalerkinSystem, y):
    return rhs(sys, State.unpack(y)).pack()


def omega_R(sys: GalerkinSystem, c):
    """b(v_n) = -I^-1 sum_p c_p m_p."""
    return sys.betas @ np.asarray(c, dtype=float)


def reconstruct_velocities(sys: GalerkinSystem, s: State):
    """(omega1, omega2, omega, omega_R) of a state."""
    wR = omega_R(sys, s.c)
    w1 = np.asarray(s.Omega, dtype=float) + wR
    w = sys.mode_omegas @ np.asarray(s.c, dtype=float)
    return w1, w1 + w, w, wR


def reconstruct_field(basis: ModeBasis, s: State) -> ExtendedField:
    return basis.field(s.c)


def initial_state(sys: GalerkinSystem, c0, omega1_0) -> State:
    """Omega(0) = omega1(0) - b(v_n(0))."""
    c0 = np.asarray(c0, dtype=float)
    return State(c0, np.asarray(omega1_0, dtype=float) - omega_R(sys, c0))
