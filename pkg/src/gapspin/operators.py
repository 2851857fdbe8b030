"""Weighted L2 algebra on fields extended rigidly into the ball.

A field lives on the liquid mesh as a full-space FE vector and carries the
angular velocity of its rigid extension into the ball.  The ball part of
every integral uses the closed-form lambda-weighted rigid term, never ball
quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ParameterError
from .fem import MATRIX_ORDER, FullSpace, tabulate
from .inertia import InertiaModel
from .mesh import INNER_S, OUTER_C


@dataclass(frozen=True, eq=False)
class ExtendedField:
    v_dofs: np.ndarray  # full-space FE vector on the liquid mesh
    omega_ball: np.ndarray  # (3,)

    def __add__(self, other):
        return ExtendedField(self.v_dofs + other.v_dofs, self.omega_ball + other.omega_ball)

    def __sub__(self, other):
        return ExtendedField(self.v_dofs - other.v_dofs, self.omega_ball - other.omega_ball)

    def __mul__(self, alpha):
        return ExtendedField(alpha * self.v_dofs, alpha * self.omega_ball)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


class WeightedProducts:
    """Precomputed weighted mass matrix and moment map for one mesh and model."""

    def __init__(self, model: InertiaModel, space: FullSpace):
        self.model = model
        self.space = space
        self.mesh = space.mesh
        self.lam = model.lam

    @cached_property
    def mass(self):
        """rho-weighted liquid mass matrix."""
        return self.model.rho * self.space.mass

    @cached_property
    def moment_rows(self):
        """(3, ndof): row j is the functional w -> e_j . rho int_L x cross w."""
        return (self.mass @ self.space.rigid).T

    def _check(self, *fields):
        for f in fields:
            if f.v_dofs.shape != (self.space.ndof,):
                raise ParameterError(
                    f"field has {f.v_dofs.shape[0]} dofs, mesh expects {self.space.ndof}"
                )

    # -- fields ------------------------------------------------------------------

    def zero(self):
        return ExtendedField(np.zeros(self.space.ndof), np.zeros(3))

    def rigid(self, xi):
        """The globally rigid field xi cross x on the whole cavity."""
        xi = np.asarray(xi, dtype=float)
        return ExtendedField(self.space.rigid @ xi, xi.copy())

    # -- products ----------------------------------------------------------------

    def inner(self, u: ExtendedField, w: ExtendedField):
        self._check(u, w)
        return float(u.v_dofs @ (self.mass @ w.v_dofs) + self.lam * (u.omega_ball @ w.omega_ball))

    def norm2(self, w):
        return self.inner(w, w)

    def moment(self, w: ExtendedField):
        """int over the cavity of rho_tilde x cross w."""
        self._check(w)
        return self.moment_rows @ w.v_dofs + self.lam * w.omega_ball

    def b(self, w: ExtendedField):
        return -self.model.I_inv @ self.moment(w)

    def apply_B(self, w: ExtendedField):
        beta = self.b(w)
        return self.rigid(-beta)

    def energy(self, w: ExtendedField):
        beta = self.b(w)
        return self.norm2(w) - float(beta @ self.model.I @ beta)

    def b_inner(self, u: ExtendedField, w: ExtendedField):
        return self.inner(u - self.apply_B(u), w)


def weighted_inner(products: WeightedProducts, u, w):
    return products.inner(u, w)


def b_functional(products: WeightedProducts, w):
    return products.b(w)


def apply_B(products: WeightedProducts, w):
    return products.apply_B(w)


def energy_functional(products: WeightedProducts, w):
    return products.energy(w)


def b_inner(products: WeightedProducts, u, w):
    return products.b_inner(u, w)


# -- invariant checks -------------------------------------------------------------

def korn_terms(space: FullSpace, v_dofs, omega, R):
    """(|grad v|^2_L, (8/3) pi R^3 |omega|^2, 2 |D v|^2_L) for a liquid field."""
    tab = tabulate(space.mesh, MATRIX_ORDER)
    _, grads = space.evaluate(v_dofs, tab)
    grad2 = float(np.einsum("tq,tqij,tqij->", tab.weights, grads, grads))
    ball = 8.0 / 3.0 * np.pi * R**3 * float(np.dot(omega, omega))
    sym = float(v_dofs @ (space.strain @ v_dofs))
    return grad2, ball, sym


def wall_radius(mesh, directions):
    """Distance from the origin to the cavity wall along unit ``directions``."""
    axes = mesh.meta.get("R_outer")
    if axes is None:
        # imported mesh: assume a spherical wall through the outermost vertex
        r = np.linalg.norm(mesh.vertices[mesh.vertices_with_tag(OUTER_C)], axis=1).max()
        return np.full(len(directions), r)
    axes = np.broadcast_to(np.asarray(axes, dtype=float), (3,))
    return 1.0 / np.sqrt(np.sum((directions / axes) ** 2, axis=1))


def swirl_field(space: FullSpace, omega):
    """Interpolant of f omega cross x with f = 1 on the ball surface, 0 on the wall.

    ``f`` decreases linearly along each ray from the ball to the wall.  For
    spherical walls the field is exactly divergence free.
    """
    omega = np.asarray(omega, dtype=float)
    mesh = space.mesh
    X = mesh.vertices
    r = np.linalg.norm(X, axis=1)
    R_in = mesh.inner_radius
    r_wall = wall_radius(mesh, X / r[:, None])
    f = np.clip((r_wall - r) / (r_wall - R_in), 0.0, 1.0)
    f[mesh.vertices_with_tag(OUTER_C)] = 0.0
    f[mesh.vertices_with_tag(INNER_S)] = 1.0
    U = np.zeros(space.ndof)
    U[: 3 * space.nv] = (f[:, None] * np.cross(omega, X)).ravel()
    return U


def coercivity_constant(products: WeightedProducts, reduced_mass, reduced_moments):
    """Exact infimum of E(w)/|w|^2 over a discrete space.

    The B-correction has rank three, so the infimum is one minus the largest
    eigenvalue of I^-1 K^T M^-1 K for the space's mass matrix M and moment
    vectors K.
    """
    MinvK = spla.splu(reduced_mass.tocsc()).solve(np.asarray(reduced_moments))
    G = reduced_moments.T @ MinvK
    ev = np.linalg.eigvals(products.model.I_inv @ G)
    return float(1.0 - np.max(ev.real))
