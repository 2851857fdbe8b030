"""Material parameters and inertia tensors in the body frame.

The frame is the canonical basis: ``IB_eigs`` are the principal moments of
the outer body, supplied already diagonalised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AssemblyError, ModelError, ParameterError
from .mesh import Mesh, integrate_scalar


@dataclass(frozen=True)
class MaterialConfig:
    rho: float
    mu: float
    R: float
    m_ball: float
    IB_eigs: tuple

    def __post_init__(self):
        for name in ("rho", "mu", "R", "m_ball"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        eigs = tuple(float(v) for v in self.IB_eigs)
        if len(eigs) != 3 or min(eigs) <= 0:
            raise ParameterError(f"IB_eigs must be three positive reals, got {self.IB_eigs}")
        object.__setattr__(self, "IB_eigs", eigs)

    def to_dict(self):
        return {"rho": self.rho, "mu": self.mu, "ball": {"radius": self.R, "mass": self.m_ball},
                "body": {"IB": list(self.IB_eigs)}}


@dataclass(frozen=True, eq=False)
class InertiaModel:
    lam: float
    I_B: np.ndarray
    I_L: np.ndarray
    I_C: np.ndarray
    I: np.ndarray
    I_inv: np.ndarray
    rho: float
    R: float
    rho_tilde: Callable

    @property
    def ball_density(self):
        return ball_density(self.lam, self.R)


def lambda_ball(m_ball, R):
    """Moment of inertia (2/5) m R^2 of a homogeneous ball about its centre."""
    if not (m_ball > 0 and R > 0):
        raise ParameterError(f"ball mass and radius must be positive, got m={m_ball}, R={R}")
    return 0.4 * m_ball * R**2


def ball_density(lam, R):
    # normalises int_ball rho_tilde (x cross w).(x cross z) to lam * omega_w . omega_z
    return 15.0 * lam / (8.0 * np.pi * R**5)


def fluid_inertia(mesh: Mesh, rho, order=None):
    """b . I_L . c = rho * int (x cross b).(x cross c) over the liquid mesh."""
    if np.any(mesh.volumes <= 0):
        bad = int(np.flatnonzero(mesh.volumes <= 0)[0])
        raise AssemblyError(f"degenerate tet {bad} in fluid inertia")

    def integrand(x):
        r2 = np.einsum("ni,ni->n", x, x)
        return r2[:, None, None] * np.eye(3)[None] - x[:, :, None] * x[:, None, :]

    I_L = rho * integrate_scalar(mesh, integrand, order=order or max(2, mesh.quadrature_order))
    return I_L


def make_rho_tilde(rho, lam, R):
    inside = ball_density(lam, R)

    def rho_tilde(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return np.where(r < R, inside, rho)

    return rho_tilde


def build_inertia_model(cfg: MaterialConfig, mesh: Mesh) -> InertiaModel:
    R_mesh = mesh.inner_radius
    if abs(R_mesh - cfg.R) > 1e-9 * cfg.R:
        raise ParameterError(f"mesh inner radius {R_mesh} does not match ball radius {cfg.R}")
    lam = lambda_ball(cfg.m_ball, cfg.R)
    I_B = np.diag(cfg.IB_eigs)
    I_L = fluid_inertia(mesh, cfg.rho)
    I_C = I_L + I_B
    I = I_C + lam * np.eye(3)
    try:
        I_inv = np.linalg.inv(I)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"inertia tensor is singular: {exc}") from None
    if np.linalg.eigvalsh(I).min() <= 0 or not np.allclose(I_inv @ I, np.eye(3), atol=1e-12):
        raise ModelError("inertia tensor is not numerically positive definite")
    for arr in (I_B, I_L, I_C, I, I_inv):
        arr.setflags(write=False)
    return InertiaModel(lam, I_B, I_L, I_C, I, I_inv, cfg.rho, cfg.R,
                        make_rho_tilde(cfg.rho, lam, cfg.R))
