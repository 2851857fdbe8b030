"""MINI-type velocity element: continuous P1 enriched by the cubic bubble.

Full-space dof layout for a mesh with ``nv`` vertices and ``nt`` tets::

    3*v + i            velocity component i at vertex v
    3*nv + 3*t + i     bubble coefficient, component i, tet t

Pressure is continuous P1 on the vertices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError
from .mesh import Mesh
from .quadrature import tet_rule

MATRIX_ORDER = 8  # bubble x bubble mass is degree 8
CONVECTION_ORDER = 7


@dataclass(frozen=True, eq=False)
class Tabulation:
    """Shape functions at the quadrature points of every tet (5 = 4 hats + bubble)."""

    phi: np.ndarray  # (nq, 5)
    grad: np.ndarray  # (nt, nq, 5, 3)
    weights: np.ndarray  # (nt, nq)
    points: np.ndarray  # (nt, nq, 3)


def tabulate(mesh: Mesh, order, tets=None) -> Tabulation:
    rule = tet_rule(order)
    lam = rule.points  # (nq, 4)
    sel = slice(None) if tets is None else tets
    nq = len(lam)
    phi = np.empty((nq, 5))
    phi[:, :4] = lam
    phi[:, 4] = 256.0 * np.prod(lam, axis=1)
    # d(bubble)/d(lambda_a) = 256 * prod_{b != a} lambda_b
    dbub = np.empty((nq, 4))
    for a in range(4):
        dbub[:, a] = 256.0 * np.prod(np.delete(lam, a, axis=1), axis=1)
    G = mesh.barycentric_gradients[sel]  # (nt, 4, 3)
    nt = G.shape[0]
    grad = np.empty((nt, nq, 5, 3))
    grad[:, :, :4, :] = G[:, None, :, :]
    grad[:, :, 4, :] = np.einsum("qa,tai->tqi", dbub, G)
    x = mesh.vertices[mesh.tets[sel]]
    points = np.einsum("qa,tai->tqi", lam, x)
    weights = mesh.volumes[sel][:, None] * rule.weights[None, :]
    return Tabulation(phi, grad, weights, points)


class FullSpace:
    """Unconstrained velocity space on a liquid mesh plus its global matrices."""

    def __init__(self, mesh: Mesh):
        if np.any(mesh.volumes <= 1e-300):
            bad = int(np.flatnonzero(mesh.volumes <= 1e-300)[0])
            raise AssemblyError(f"degenerate tet {bad}")
        self.mesh = mesh
        self.nv = mesh.n_vertices
        self.nt = mesh.n_tets
        self.ndof = 3 * (self.nv + self.nt)

    @cached_property
    def local_dofs(self):
        """(nt, 5, 3) global dof indices of each local (basis, component)."""
        nodes = np.empty((self.nt, 5), dtype=np.int64)
        nodes[:, :4] = self.mesh.tets
        nodes[:, 4] = self.nv + np.arange(self.nt)
        return 3 * nodes[:, :, None] + np.arange(3)[None, None, :]

    @cached_property
    def tab(self):
        return tabulate(self.mesh, MATRIX_ORDER)

    def _assemble(self, local, rows, cols, shape):
        # local (nt, nr, nc); duplicates are summed by scipy in a fixed order
        r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
        c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
        m = sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()
        m.sum_duplicates()
        return m

    @cached_property
    def mass(self):
        """Unit-density L2 mass matrix of vector fields on the liquid."""
        t = self.tab
        scalar = np.einsum("tq,qa,qb->tab", t.weights, t.phi, t.phi)
        local = np.einsum("tab,ij->taibj", scalar, np.eye(3)).reshape(self.nt, 15, 15)
        dofs = self.local_dofs.reshape(self.nt, 15)
        return self._assemble(local, dofs, dofs, (self.ndof, self.ndof))

    @cached_property
    def strain(self):
        """Matrix of int 2 D(u):D(v) (unit viscosity; multiply by mu)."""
        t = self.tab
        gg = np.einsum("tq,tqai,tqbi->tab", t.weights, t.grad, t.grad)
        cross = np.einsum("tq,tqaj,tqbi->taibj", t.weights, t.grad, t.grad)
        local = np.einsum("tab,ij->taibj", gg, np.eye(3)) + cross
        dofs = self.local_dofs.reshape(self.nt, 15)
        return self._assemble(local.reshape(self.nt, 15, 15), dofs, dofs, (self.ndof, self.ndof))

    @cached_property
    def divergence(self):
        """(nv, ndof) matrix of int q_c div(v) with q_c the P1 pressure hats."""
        t = tabulate(self.mesh, 4)
        local = np.einsum("tq,qc,tqbj->tcbj", t.weights, t.phi[:, :4], t.grad)
        dofs = self.local_dofs.reshape(self.nt, 15)
        return self._assemble(local.reshape(self.nt, 4, 15), self.mesh.tets, dofs,
                              (self.nv, self.ndof))

    @cached_property
    def rigid(self):
        """(ndof, 3): column j holds e_j x x at every vertex, zero bubbles."""
        R = np.zeros((self.ndof, 3))
        X = self.mesh.vertices
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1.0
            R[: 3 * self.nv, j] = np.cross(e, X).ravel()
        return R

    def gather(self, U):
        """Local coefficients (nt, 5, 3) of a full-space vector (or (..., ndof) batch)."""
        U = np.asarray(U)
        return U[..., self.local_dofs]

    def evaluate(self, U, tab: Tabulation, tets=None):
        """Values (..., nt, nq, 3) and gradients (..., nt, nq, 3, 3) [i, j] = d_j u_i."""
        loc = self.gather(U)
        if tets is not None:
            loc = loc[..., tets, :, :]
        vals = np.einsum("qa,...tai->...tqi", tab.phi, loc, optimize=True)
        # batched over tets: (t, batch*3, 5) @ (t, 5, nq*3)
        batch = loc.shape[:-3]
        nt, nq = tab.grad.shape[0], tab.grad.shape[1]
        L = np.moveaxis(loc.reshape(-1, nt, 5, 3), 1, 0).transpose(0, 1, 3, 2).reshape(nt, -1, 5)
        Gt = tab.grad.transpose(0, 2, 1, 3).reshape(nt, 5, nq * 3)
        g = (L @ Gt).reshape(nt, -1, 3, nq, 3)  # (t, b, i, q, j)
        grads = np.ascontiguousarray(g.transpose(1, 0, 3, 2, 4)).reshape(*batch, nt, nq, 3, 3)
        return vals, grads

    def interpolate(self, f):
        """Nodal interpolant of a vector field f: (N, 3) -> (N, 3); bubbles zero."""
        U = np.zeros(self.ndof)
        U[: 3 * self.nv] = np.asarray(f(self.mesh.vertices), dtype=float).ravel()
        return U
