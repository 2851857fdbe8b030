"""Stage functions shared by the command line and the tests.

Each stage reads and writes the files of a run directory::

    mesh.txt  basis.bin  sys.bin  series.csv  summary.json  config.echo
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import container
from .config import RunConfig
from .diagnostics import TimeSeries, summarize, write_summary
from .discretization import ConstrainedSpace, ModeBasis, solve_eigenbasis
from .errors import GapspinError, IntegrityError
from .galerkin import GalerkinSystem, State, assemble_tensors, initial_state
from .inertia import InertiaModel, MaterialConfig, build_inertia_model
from .integrator import IntegratorConfig, Trajectory, default_dt, integrate
from .mesh import Mesh, export_mesh, generate_annulus_mesh

log = logging.getLogger(__name__)

BASIS_KIND = "basis"
SYSTEM_KIND = "system"


def material_from_dict(d) -> MaterialConfig:
    return MaterialConfig(rho=d["rho"], mu=d["mu"], R=d["ball"]["radius"],
                          m_ball=d["ball"]["mass"], IB_eigs=tuple(d["body"]["IB"]))


def build_mesh(cfg: RunConfig) -> Mesh:
    m = cfg.mesh
    return generate_annulus_mesh(m.R_inner, m.outer, m.refinement, m.quadrature_order)


# -- basis ----------------------------------------------------------------------

@dataclass(eq=False)
class BasisBundle:
    basis: ModeBasis
    model: InertiaModel
    material: MaterialConfig
    seed: int = 0

    @property
    def mesh(self) -> Mesh:
        return self.basis.space.mesh


def compute_basis(mesh: Mesh, material: MaterialConfig, n_modes, seed=0) -> BasisBundle:
    model = build_inertia_model(material, mesh)
    space = ConstrainedSpace(mesh)
    basis = solve_eigenbasis(space, model, material.mu, n_modes, seed=seed)
    return BasisBundle(basis, model, material, seed)


def save_basis(bundle: BasisBundle, path, encoding="binary"):
    mesh = bundle.mesh
    arrays = {"vertices": mesh.vertices, "tets": mesh.tets, "faces": mesh.boundary_faces,
              "tags": mesh.face_tags, "coeffs": bundle.basis.coeffs,
              "sigmas": bundle.basis.sigmas, "residuals": bundle.basis.residuals}
    meta = {"material": bundle.material.to_dict(), "mesh": mesh.meta,
            "quadrature_order": mesh.quadrature_order, "seed": bundle.seed}
    container.save(path, arrays, meta, BASIS_KIND, encoding)


def load_basis(path) -> BasisBundle:
    arrays, meta = container.load(path, BASIS_KIND)
    mesh = Mesh(arrays["vertices"], arrays["tets"], arrays["faces"], arrays["tags"],
                meta["quadrature_order"], meta["mesh"])
    material = material_from_dict(meta["material"])
    model = build_inertia_model(material, mesh)
    space = ConstrainedSpace(mesh)
    if arrays["coeffs"].shape[0] != space.dim:
        raise IntegrityError("basis vectors do not match the stored mesh")
    basis = ModeBasis(space, arrays["coeffs"], arrays["sigmas"], arrays["residuals"])
    return BasisBundle(basis, model, material, meta["seed"])


# -- reduced system -----------------------------------------------------------------

def compute_system(bundle: BasisBundle) -> GalerkinSystem:
    return assemble_tensors(bundle.basis, bundle.model, bundle.material.mu)


def save_system(sys: GalerkinSystem, path, meta=None, encoding="binary"):
    container.save(path, sys.arrays(), dict(meta or {}, mu=sys.mu), SYSTEM_KIND, encoding)


def load_system(path) -> tuple[GalerkinSystem, dict]:
    arrays, meta = container.load(path, SYSTEM_KIND)
    return GalerkinSystem(**arrays, mu=meta["mu"]), meta


# -- simulation -----------------------------------------------------------------

def initial_coefficients(sys: GalerkinSystem, cfg: RunConfig):
    v0 = cfg.initial.v0
    if v0 == "zero":
        return np.zeros(sys.n)
    if v0 == "rigid-interp":
        return sys.rigid_projection @ cfg.initial.omega0
    c = np.zeros(sys.n)
    c[: len(v0)] = v0
    return c


def scenario_state(sys: GalerkinSystem, cfg: RunConfig) -> State:
    return initial_state(sys, initial_coefficients(sys, cfg), cfg.initial.omega1_0)


def integrator_config(sys: GalerkinSystem, cfg: RunConfig, dt=None, t_end=None):
    integ = cfg.integrator
    step = dt if dt is not None else integ["dt"]
    if step == "auto":
        step = default_dt(sys)
    guard = integ["energy_guard"]
    return IntegratorConfig(dt=float(step), t_end=float(t_end or integ["t_end"]),
                            method=integ["method"], rtol=integ["rtol"], atol=integ["atol"],
                            energy_guard=None if guard is False else guard,
                            output_every=cfg.cadence)


def simulate(sys: GalerkinSystem, cfg: RunConfig, out_dir, dt=None, t_end=None):
    """Integrate the configured scenario and write series.csv and summary.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    icfg = integrator_config(sys, cfg, dt, t_end)
    traj: Trajectory = integrate(sys, scenario_state(sys, cfg), icfg)
    ts = TimeSeries.from_trajectory(sys, traj)
    ts.write_csv(out / "series.csv")
    summary = summarize(ts)
    write_summary(summary, out / "summary.json")
    return ts, summary


def run_scenario(cfg: RunConfig, out_dir) -> dict:
    """mesh -> basis -> tensors -> simulate, writing every artefact to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.echo").write_text(cfg.echo())
    timings = {}

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            result = fn()
        except GapspinError as exc:
            exc.stage = name
            raise
        timings[name] = time.perf_counter() - t0
        return result

    def write_mesh():
        m = build_mesh(cfg)
        export_mesh(m, out / "mesh.txt")
        return m

    def eig():
        b = compute_basis(mesh, cfg.material, cfg.modes, cfg.seed)
        save_basis(b, out / "basis.bin")
        return b

    def tensors():
        s = compute_system(bundle)
        save_system(s, out / "sys.bin", {"material": cfg.material.to_dict(), "mesh": mesh.meta})
        return s

    mesh = stage("mesh", write_mesh)
    bundle = stage("eig", eig)
    sys = stage("tensors", tensors)
    _, summary = stage("simulate", lambda: simulate(sys, cfg, out))
    log.info("stage timings: %s", {k: round(v, 2) for k, v in timings.items()})
    return summary
