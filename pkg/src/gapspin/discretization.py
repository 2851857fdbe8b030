"""Constrained velocity space, weighted matrices and the Stokes-type eigenbasis.

Reduced coordinates are ``[free dofs..., omega_x, omega_y, omega_z]``: free
dofs are velocity components at interior vertices plus all bubble
coefficients; the last three are the ball's angular velocity, which fixes the
velocity at every vertex on the ball surface to omega x x.  Vertices on the
cavity wall carry zero velocity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ParameterError, SolverError
from .fem import FullSpace
from .inertia import InertiaModel
from .mesh import INNER_S, OUTER_C, Mesh
from .operators import ExtendedField

log = logging.getLogger(__name__)


class ConstrainedSpace:
    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.full = FullSpace(mesh)
        nv, ndof = self.full.nv, self.full.ndof
        wall = mesh.vertices_with_tag(OUTER_C)
        ball = mesh.vertices_with_tag(INNER_S)
        if len(ball) == 0:
            raise ParameterError("liquid mesh has no INNER_S boundary")
        fixed = np.zeros(nv, dtype=bool)
        fixed[wall] = True
        fixed[ball] = True
        free_vertices = np.flatnonzero(~fixed)
        self.free_dofs = np.concatenate([
            (3 * free_vertices[:, None] + np.arange(3)).ravel(),
            np.arange(3 * nv, ndof),
        ])
        self.n_free = len(self.free_dofs)
        self.rigid_dofs = np.arange(self.n_free, self.n_free + 3)
        self.dim = self.n_free + 3
        self.ball_vertices = ball
        self.wall_vertices = wall

        rows = [self.free_dofs]
        cols = [np.arange(self.n_free)]
        vals = [np.ones(self.n_free)]
        X = mesh.vertices[ball]
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1.0
            ex = np.cross(e, X)  # (nb, 3)
            rows.append((3 * ball[:, None] + np.arange(3)).ravel())
            cols.append(np.full(3 * len(ball), self.n_free + j))
            vals.append(ex.ravel())
        self.constraint_map = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(ndof, self.dim),
        )

    @cached_property
    def div_matrix(self):
        """(nv, dim) discrete divergence onto continuous P1 pressures."""
        return (self.full.divergence @ self.constraint_map).tocsr()

    def embed(self, x) -> ExtendedField:
        x = np.asarray(x, dtype=float)
        return ExtendedField(self.constraint_map @ x, x[self.n_free:].copy())

    def restrict(self, w: ExtendedField):
        """Reduced coordinates of a field that already satisfies the constraints."""
        return np.concatenate([w.v_dofs[self.free_dofs], w.omega_ball])

    def field_from_sampler(self, v0, omega0):
        """Nodal interpolant of ``v0`` forced to 0 on the wall and omega0 x x on the ball."""
        omega0 = np.asarray(omega0, dtype=float)
        x = np.zeros(self.dim)
        U = self.full.interpolate(v0)
        x[: self.n_free] = U[self.free_dofs]
        x[self.n_free:] = omega0
        return x

    def constraint_residual(self, w: ExtendedField):
        """Max violation of the wall and ball-surface trace conditions."""
        V = w.v_dofs[: 3 * self.full.nv].reshape(-1, 3)
        wall = np.abs(V[self.wall_vertices]).max(initial=0.0)
        X = self.mesh.vertices[self.ball_vertices]
        ball = np.abs(V[self.ball_vertices] - np.cross(w.omega_ball, X)).max(initial=0.0)
        return float(max(wall, ball))


def assemble_dissipation(space: ConstrainedSpace, mu):
    """Matrix of 2 mu int D(v):D(w) on the reduced coordinates."""
    P = space.constraint_map
    return (mu * (P.T @ space.full.strain @ P)).tocsr()


def assemble_weighted_mass(space: ConstrainedSpace, model: InertiaModel):
    P = space.constraint_map
    M = model.rho * (P.T @ space.full.mass @ P)
    ball = sp.csr_matrix((np.full(3, model.lam), (space.rigid_dofs, space.rigid_dofs)),
                         shape=(space.dim, space.dim))
    return (M + ball).tocsr()


def assemble_moments(space: ConstrainedSpace, model: InertiaModel):
    """(dim, 3): column j maps reduced x to e_j . int rho_tilde x cross w."""
    P = space.constraint_map
    K = P.T @ (model.rho * (space.full.mass @ space.full.rigid))
    K = np.asarray(K)
    K[space.rigid_dofs, np.arange(3)] += model.lam
    return K


class BMass:
    """Weighted mass minus the rank-3 correction K I^-1 K^T."""

    def __init__(self, mass, moments, I_inv):
        self.mass = mass
        self.moments = moments
        self.I_inv = np.asarray(I_inv)
        self.shape = mass.shape
        self.dtype = np.float64

    def __matmul__(self, x):
        x = np.asarray(x)
        return self.mass @ x - self.moments @ (self.I_inv @ (self.moments.T @ x))

    def correction(self):
        return self.moments @ self.I_inv @ self.moments.T

    def toarray(self):
        return self.mass.toarray() - self.correction()

    def as_operator(self):
        return spla.LinearOperator(self.shape, matvec=self.__matmul__, dtype=np.float64)


def assemble_B_mass(space: ConstrainedSpace, model: InertiaModel) -> BMass:
    return BMass(assemble_weighted_mass(space, model), assemble_moments(space, model), model.I_inv)


@dataclass(eq=False)
class ModeBasis:
    space: ConstrainedSpace
    coeffs: np.ndarray  # (dim, n) reduced coordinates, B-orthonormal columns
    sigmas: np.ndarray  # (n,)
    residuals: np.ndarray = field(default=None)

    @property
    def n(self):
        return len(self.sigmas)

    @property
    def full(self):
        """(ndof, n) full-space vectors of the modes."""
        return np.asarray(self.space.constraint_map @ self.coeffs)

    @property
    def omegas(self):
        """(3, n) ball angular velocity of each mode."""
        return self.coeffs[self.space.rigid_dofs]

    @property
    def modes(self):
        return [self.space.embed(self.coeffs[:, k]) for k in range(self.n)]

    def field(self, c) -> ExtendedField:
        return self.space.embed(self.coeffs @ np.asarray(c, dtype=float))


class _SaddleSolver:
    """Solves [[A, D^T], [D, 0]] [x; p] = [f; 0] with one pressure pinned."""

    def __init__(self, A, D):
        D = D[:-1]  # constants are in the pressure kernel
        self.n = A.shape[0]
        K = sp.bmat([[A, D.T], [D, None]], format="csc")
        self.lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A")
        self.np = D.shape[0]

    def solve(self, f):
        rhs = np.concatenate([f, np.zeros(self.np)])
        return self.lu.solve(rhs)[: self.n]


def divergence_free_dimension(space: ConstrainedSpace, tol=1e-10):
    """dim - rank(div_matrix), rank from a dense SVD (small meshes only)."""
    s = np.linalg.svd(space.div_matrix.toarray(), compute_uv=False)
    rank = int(np.sum(s > tol * s[0]))
    return space.dim - rank, rank


def constrained_residual(A, MB, D, w, sigma):
    """Residual of A w = sigma M_B w on the divergence-free subspace.

    The raw residual is balanced by a pressure gradient D^T p; the least
    squares pressure is removed before taking the norm.
    """
    r = A @ w - sigma * (MB @ w)
    Dp = D[:-1]
    p = spla.spsolve((Dp @ Dp.T).tocsc(), Dp @ r)
    return r - Dp.T @ p


def solve_eigenbasis(space: ConstrainedSpace, model: InertiaModel, mu, n_modes, seed=0,
                     tol=1e-13) -> ModeBasis:
    """Lowest ``n_modes`` pairs of a(w, .) = sigma (w, .)_B on divergence-free fields.

    Shift-invert Lanczos about zero (ARPACK), each inverse application being a
    saddle-point solve that enforces the discrete divergence constraint,
    followed by a Rayleigh-Ritz pass that B-orthonormalises the modes.
    """
    if n_modes < 1:
        raise ParameterError(f"n_modes must be >= 1, got {n_modes}")
    A = assemble_dissipation(space, mu)
    MB = assemble_B_mass(space, model)
    D = space.div_matrix
    n_div_free = space.dim - (D.shape[0] - 1)
    if n_modes > n_div_free:
        raise ParameterError(f"n_modes={n_modes} exceeds divergence-free dimension {n_div_free}")
    saddle = _SaddleSolver(A, D)
    # ARPACK applies M itself: OPinv is the constrained inverse of A only
    op = spla.LinearOperator(A.shape, matvec=saddle.solve, dtype=np.float64)
    rng = np.random.default_rng(seed)
    v0 = saddle.solve(rng.standard_normal(space.dim))
    ncv = min(n_div_free, max(2 * n_modes + 1, n_modes + 32))
    try:
        vals, vecs = spla.eigsh(A, k=n_modes, M=MB.as_operator(), sigma=0.0, which="LM",
                                OPinv=op, v0=v0, ncv=ncv, tol=tol, maxiter=10000)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"eigensolver did not converge: {exc}") from None

    # Rayleigh-Ritz with full B-orthonormalisation
    X = vecs
    Ak = X.T @ (A @ X)
    Mk = X.T @ (MB @ X)
    Ak = 0.5 * (Ak + Ak.T)
    Mk = 0.5 * (Mk + Mk.T)
    sig, Y = sla.eigh(Ak, Mk)
    W = X @ Y
    # second pass removes the residual non-orthogonality of the first
    G = W.T @ (MB @ W)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    W = np.linalg.solve(L, W.T).T
    # deterministic signs: largest-magnitude component positive
    idx = np.argmax(np.abs(W), axis=0)
    W = W * np.sign(W[idx, np.arange(W.shape[1])])

    residuals = np.array([
        np.linalg.norm(constrained_residual(A, MB, D, W[:, k], sig[k])) / np.linalg.norm(W[:, k])
        for k in range(n_modes)
    ])
    if np.any(sig <= 0):
        raise SolverError("nonpositive eigenvalue", residuals=residuals)
    log.info("eigenbasis: sigma in [%.6g, %.6g], max residual %.3g", sig[0], sig[-1],
             residuals.max())
    return ModeBasis(space, W, sig, residuals)


def project_field(basis: ModeBasis, model: InertiaModel, v0, omega0, mass=None):
    """B-orthogonal projection of a compatible initial field onto the modes.

    Returns ``(projected ExtendedField, coefficients, reduced vector of the
    unprojected field)``.
    """
    space = basis.space
    x = space.field_from_sampler(v0, omega0)
    MB = mass if mass is not None else assemble_B_mass(space, model)
    c = basis.coeffs.T @ (MB @ x)
    return basis.field(c), c, x
