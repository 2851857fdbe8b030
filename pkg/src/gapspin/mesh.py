"""Tetrahedral meshes of the liquid gap (spherical shell) and of the ball.

Surfaces come from a subdivided icosahedron; the volume is built by sweeping
the surface triangulation radially into prisms, each split into three tets
with a vertex-index rule that keeps neighbouring prisms conforming.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import MeshParseError, MeshValidationError, ParameterError
from .quadrature import QuadratureRule, tet_rule

OUTER_C = 1
INNER_S = 2
TAG_NAMES = {OUTER_C: "OUTER_C", INNER_S: "INNER_S"}
TAG_CODES = {v: k for k, v in TAG_NAMES.items()}

HEADER = "gapspin-mesh v1"


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (nv, 3)
    tets: np.ndarray  # (nt, 4)
    boundary_faces: np.ndarray  # (nf, 3)
    face_tags: np.ndarray  # (nf,) OUTER_C / INNER_S
    quadrature_order: int = 2
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("vertices", "tets", "boundary_faces", "face_tags"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_tets(self):
        return len(self.tets)

    @cached_property
    def edge_matrices(self):
        """(nt, 3, 3) with columns x1-x0, x2-x0, x3-x0."""
        x = self.vertices[self.tets]
        return np.transpose(x[:, 1:] - x[:, :1], (0, 2, 1))

    @cached_property
    def signed_volumes(self):
        return np.linalg.det(self.edge_matrices) / 6.0

    @cached_property
    def volumes(self):
        return np.abs(self.signed_volumes)

    @cached_property
    def barycentric_gradients(self):
        """(nt, 4, 3) gradients of the four barycentric coordinates."""
        inv = np.linalg.inv(self.edge_matrices)  # rows: grad lambda_1..3
        g = np.empty((self.n_tets, 4, 3))
        g[:, 1:] = inv
        g[:, 0] = -inv.sum(axis=1)
        return g

    def quadrature(self, order=None) -> QuadratureRule:
        return tet_rule(self.quadrature_order if order is None else order)

    def quadrature_points(self, order=None):
        """Physical quadrature points (nt, nq, 3) and weights (nt, nq)."""
        rule = self.quadrature(order)
        x = self.vertices[self.tets]
        pts = np.einsum("qa,tai->tqi", rule.points, x)
        wts = self.volumes[:, None] * rule.weights[None, :]
        return pts, wts

    def faces_with_tag(self, tag):
        return self.boundary_faces[self.face_tags == tag]

    def vertices_with_tag(self, tag):
        return np.unique(self.faces_with_tag(tag))

    @property
    def inner_radius(self):
        idx = self.vertices_with_tag(INNER_S)
        return float(np.mean(np.linalg.norm(self.vertices[idx], axis=1)))

    def face_normals(self):
        """Unit right-hand normals of the boundary faces."""
        x = self.vertices[self.boundary_faces]
        n = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def validate(self, sphere_tol=1e-9):
        if np.any(self.signed_volumes <= 0):
            bad = int(np.flatnonzero(self.signed_volumes <= 0)[0])
            raise MeshValidationError(f"tet {bad} has nonpositive signed volume")
        unknown = ~np.isin(self.face_tags, list(TAG_NAMES))
        if np.any(unknown):
            raise MeshValidationError(
                f"boundary face {int(np.flatnonzero(unknown)[0])} has no valid tag"
            )
        topo = _topological_boundary(self.tets)
        listed = {tuple(sorted(f)) for f in self.boundary_faces.tolist()}
        if len(listed) != len(self.boundary_faces):
            raise MeshValidationError("duplicate boundary face")
        missing = topo - listed
        if missing:
            raise MeshValidationError(f"untagged boundary face {sorted(missing)[0]}")
        extra = listed - topo
        if extra:
            raise MeshValidationError(f"face {sorted(extra)[0]} is not on the boundary")
        inner = self.vertices_with_tag(INNER_S)
        if len(inner):
            r = np.linalg.norm(self.vertices[inner], axis=1)
            if np.ptp(r) > sphere_tol * max(1.0, r.max()):
                raise MeshValidationError("INNER_S vertices do not lie on a sphere about the origin")
        return self


def _topological_boundary(tets):
    faces = np.concatenate(
        [tets[:, [1, 2, 3]], tets[:, [0, 2, 3]], tets[:, [0, 1, 3]], tets[:, [0, 1, 2]]]
    )
    faces = np.sort(faces, axis=1)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    return {tuple(f) for f in uniq[counts == 1].tolist()}


# -- icosphere -----------------------------------------------------------------

def icosphere(level):
    """Unit-sphere triangulation: (directions (ns, 3), faces (nf, 3))."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.array(verts), np.array(faces, dtype=np.int64)


def _levels(refinement, kind):
    """(icosphere level, radial layers) for a refinement index."""
    if kind == "shell":
        return refinement + 1, 2 * refinement + 4
    return refinement + 1, refinement + 1


def _prism_tets(faces, ns, layer):
    """Split the prisms of one layer into conforming tets."""
    f = np.sort(faces, axis=1)
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    lo, hi = layer * ns, (layer + 1) * ns
    return np.concatenate([
        np.stack([a + lo, b + lo, c + lo, c + hi], axis=1),
        np.stack([a + lo, b + lo, b + hi, c + hi], axis=1),
        np.stack([a + lo, a + hi, b + hi, c + hi], axis=1),
    ])


def _orient_tets(vertices, tets):
    x = vertices[tets]
    vol = np.einsum("ti,ti->t", np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), x[:, 3] - x[:, 0])
    tets = tets.copy()
    neg = vol < 0
    tets[neg, 0], tets[neg, 1] = tets[neg, 1].copy(), tets[neg, 0].copy()
    return tets


def _orient_faces(vertices, faces, outward):
    """Order face vertices so the right-hand normal points away from (outward=True)
    or toward the origin."""
    x = vertices[faces]
    n = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    s = np.einsum("fi,fi->f", n, x.mean(axis=1))
    flip = (s < 0) if outward else (s > 0)
    faces = faces.copy()
    faces[flip, 1], faces[flip, 2] = faces[flip, 2].copy(), faces[flip, 1].copy()
    return faces


def _outer_radius(directions, R_outer):
    axes = np.broadcast_to(np.asarray(R_outer, dtype=float), (3,))
    return 1.0 / np.sqrt(np.sum((directions / axes) ** 2, axis=1))


def generate_annulus_mesh(R_inner, R_outer, refinement, quadrature_order=2) -> Mesh:
    """Mesh of the gap between the sphere |x| = R_inner and the cavity wall.

    ``R_outer`` is either a radius (concentric spheres) or three semi-axes of
    an axis-aligned ellipsoidal cavity.
    """
    axes = np.broadcast_to(np.asarray(R_outer, dtype=float), (3,))
    if not (R_inner > 0 and np.all(axes > R_inner)):
        raise ParameterError(
            f"need 0 < R_inner < R_outer, got R_inner={R_inner}, R_outer={R_outer}"
        )
    if refinement < 0 or int(refinement) != refinement:
        raise ParameterError(f"refinement must be a nonnegative integer, got {refinement}")
    level, layers = _levels(int(refinement), "shell")
    dirs, faces = icosphere(level)
    ns = len(dirs)
    r_out = _outer_radius(dirs, axes)
    t = np.linspace(0.0, 1.0, layers + 1)
    radii = R_inner + t[:, None] * (r_out - R_inner)[None, :]  # (layers+1, ns)
    vertices = (radii[:, :, None] * dirs[None]).reshape(-1, 3)
    vertices[:ns] = R_inner * dirs  # exact sphere
    tets = np.concatenate([_prism_tets(faces, ns, k) for k in range(layers)])
    tets = _orient_tets(vertices, tets)
    inner = _orient_faces(vertices, faces, outward=False)
    outer = _orient_faces(vertices, faces + layers * ns, outward=True)
    bfaces = np.concatenate([inner, outer])
    tags = np.concatenate([np.full(len(inner), INNER_S), np.full(len(outer), OUTER_C)])
    meta = {"kind": "shell", "R_inner": float(R_inner), "R_outer": axes.tolist(),
            "refinement": int(refinement)}
    return Mesh(vertices, tets, bfaces, tags, quadrature_order, meta)


def generate_ball_mesh(R, refinement, quadrature_order=2) -> Mesh:
    """Mesh of the ball |x| < R centred at the origin; boundary tagged INNER_S."""
    if not R > 0:
        raise ParameterError(f"ball radius must be positive, got {R}")
    if refinement < 0 or int(refinement) != refinement:
        raise ParameterError(f"refinement must be a nonnegative integer, got {refinement}")
    level, layers = _levels(int(refinement), "ball")
    dirs, faces = icosphere(level)
    ns = len(dirs)
    radii = R * np.arange(1, layers + 1) / layers
    shells = (radii[:, None, None] * dirs[None]).reshape(-1, 3)
    shells[-ns:] = R * dirs
    vertices = np.concatenate([np.zeros((1, 3)), shells])
    core = np.concatenate([np.zeros((len(faces), 1), dtype=np.int64), faces + 1], axis=1)
    parts = [core] + [_prism_tets(faces, ns, k) + 1 for k in range(layers - 1)]
    tets = _orient_tets(vertices, np.concatenate(parts))
    bfaces = _orient_faces(vertices, faces + 1 + (layers - 1) * ns, outward=True)
    tags = np.full(len(bfaces), INNER_S)
    meta = {"kind": "ball", "R": float(R), "refinement": int(refinement)}
    return Mesh(vertices, tets, bfaces, tags, quadrature_order, meta)


# -- integration ---------------------------------------------------------------

def integrate_scalar(mesh: Mesh, f, order=None):
    """Integrate ``f`` over the mesh.

    ``f`` maps an (N, 3) array of points to N values (or N x ... arrays for
    vector integrands).  Per-tet sums are reduced with numpy's pairwise sum,
    so the result does not depend on how callers batch the evaluation.
    """
    pts, wts = mesh.quadrature_points(order)
    nt, nq = wts.shape
    vals = np.asarray(f(pts.reshape(-1, 3)), dtype=float)
    vals = vals.reshape((nt, nq) + vals.shape[1:])
    per_tet = np.einsum("tq,tq...->t...", wts, vals)
    return np.sum(per_tet, axis=0)


# -- ASCII format --------------------------------------------------------------

def export_mesh(mesh: Mesh, path):
    lines = [HEADER, f"{mesh.n_vertices} {mesh.n_tets} {len(mesh.boundary_faces)}"]
    lines += [" ".join(f"{c:.17g}" for c in v) for v in mesh.vertices.tolist()]
    lines += [" ".join(str(i) for i in t) for t in mesh.tets.tolist()]
    for face, tag in zip(mesh.boundary_faces.tolist(), mesh.face_tags.tolist()):
        lines.append(f"{face[0]} {face[1]} {face[2]} {TAG_NAMES[tag]}")
    Path(path).write_text("\n".join(lines) + "\n")


def import_mesh(path, quadrature_order=2) -> Mesh:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != HEADER:
        raise MeshParseError(f"expected header {HEADER!r}", line=1)
    try:
        nv, nt, nf = (int(s) for s in text[1].split())
    except (IndexError, ValueError):
        raise MeshParseError("expected 'nv nt nf' counts", line=2) from None
    body = text[2:]
    if len(body) < nv + nt + nf:
        raise MeshParseError(f"file truncated: expected {nv + nt + nf} records", line=len(text))

    vertices = np.empty((nv, 3))
    tets = np.empty((nt, 4), dtype=np.int64)
    faces = np.empty((nf, 3), dtype=np.int64)
    tags = np.zeros(nf, dtype=np.int64)
    lineno = 3
    try:
        for i in range(nv):
            parts = body[i].split()
            if len(parts) != 3:
                raise ValueError("vertex needs 3 coordinates")
            vertices[i] = [float(p) for p in parts]
            lineno += 1
        for i in range(nt):
            parts = body[nv + i].split()
            if len(parts) != 4:
                raise ValueError("tet needs 4 indices")
            tets[i] = [int(p) for p in parts]
            lineno += 1
        for i in range(nf):
            parts = body[nv + nt + i].split()
            if len(parts) not in (3, 4):
                raise ValueError("boundary face needs 3 indices and a tag")
            faces[i] = [int(p) for p in parts[:3]]
            if len(parts) == 4:
                if parts[3] not in TAG_CODES:
                    raise ValueError(f"unknown boundary tag {parts[3]!r}")
                tags[i] = TAG_CODES[parts[3]]
            lineno += 1
    except ValueError as exc:
        raise MeshParseError(str(exc), line=lineno) from None
    if (tets.size and (tets.min() < 0 or tets.max() >= nv)) or (
        faces.size and (faces.min() < 0 or faces.max() >= nv)
    ):
        raise MeshValidationError("vertex index out of range")
    if np.any(tags == 0):
        raise MeshValidationError(f"boundary face {int(np.flatnonzero(tags == 0)[0])} has no tag")
    mesh = Mesh(vertices, tets, faces, tags, quadrature_order, {"source": str(path)})
    return mesh.validate()
