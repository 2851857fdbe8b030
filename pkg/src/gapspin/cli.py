"""Command line interface.

Exit codes: 0 ok, 2 configuration or input error, 3 numerical failure,
4 invariant failure.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _vector(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from None
    if len(vals) != 3:
        raise click.BadParameter(f"expected three components, got {text!r}")
    return vals


def _fail(stage, exc, code):
    stage = getattr(exc, "stage", stage)
    click.echo(f"error [{stage}]: {exc}", err=True)
    sys.exit(code)


def _guard(stage, fn):
    """Run ``fn`` and map package exceptions to exit codes."""
    from .errors import GapspinError

    try:
        return fn()
    except GapspinError as exc:
        _fail(stage, exc, exc.exit_code)
    except OSError as exc:
        _fail(stage, exc, EXIT_CONFIG)
    except (FloatingPointError, ArithmeticError, MemoryError) as exc:
        _fail(stage, exc, EXIT_NUMERIC)


def _load_config(path, seed=None, out=None):
    from .config import build_run_config, effective_config
    import tomlkit

    raw = {}
    if path is not None:
        from .errors import ConfigError

        try:
            raw = tomlkit.parse(Path(path).read_text()).unwrap()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except Exception as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    raw = effective_config(raw)
    if seed is not None:
        raw["seed"] = seed
    if out is not None:
        raw["outputs"]["directory"] = str(out)
    return build_run_config(raw)


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Scenario configuration (TOML).")
@click.option("--out", "out", type=click.Path(), default=None, help="Output file or directory.")
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.option("--threads", type=int, default=None, help="Threads for the linear algebra backend.")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
@click.pass_context
def main(ctx, config_path, out, seed, threads, verbose):
    """Rigid body with a liquid-filled gap around a rigid ball."""
    if threads is not None:
        if threads < 1:
            raise click.BadParameter("--threads must be >= 1")
        for var in _THREAD_VARS:
            os.environ[var] = str(threads)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config_path, "out": out, "seed": seed}


def _opt(ctx, name, local):
    return local if local is not None else ctx.obj.get(name)


@main.command("mesh")
@click.option("--inner-r", type=float, required=True)
@click.option("--outer-r", type=str, required=True,
              help="Wall radius, or three comma-separated semi-axes.")
@click.option("--refine", type=int, default=1, show_default=True)
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def mesh_cmd(ctx, inner_r, outer_r, refine, out):
    """Generate the liquid-gap mesh and write it in ASCII format."""
    from .mesh import export_mesh, generate_annulus_mesh

    out = _opt(ctx, "out", out) or "mesh.txt"
    outer = _vector(outer_r) if "," in outer_r else float(outer_r)

    def work():
        m = generate_annulus_mesh(inner_r, outer, refine)
        export_mesh(m, out)
        return m

    m = _guard("mesh", work)
    click.echo(f"wrote {out}: {m.n_vertices} vertices, {m.n_tets} tets")


@main.command("eig")
@click.option("--mesh", "mesh_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--modes", type=int, default=None, help="Number of modes (default from config).")
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None)
@click.option("--ascii", "ascii_", is_flag=True, help="Write the ASCII container variant.")
@click.pass_context
def eig_cmd(ctx, mesh_path, config_path, modes, out, ascii_):
    """Solve the constrained eigenproblem and write basis.bin."""
    from .config import MAX_MODES
    from .errors import ConfigError
    from .mesh import import_mesh
    from .pipeline import compute_basis, save_basis

    out = _opt(ctx, "out", out) or "basis.bin"

    def work():
        cfg = _load_config(_opt(ctx, "config", config_path), ctx.obj["seed"])
        n = modes if modes is not None else cfg.modes
        if not 1 <= n <= MAX_MODES:
            raise ConfigError(f"modes must be in [1, {MAX_MODES}], got {n}")
        mesh = import_mesh(mesh_path)
        bundle = compute_basis(mesh, cfg.material, n, cfg.seed)
        save_basis(bundle, out, "ascii" if ascii_ else "binary")
        return bundle

    b = _guard("eig", work)
    click.echo(f"wrote {out}: {b.basis.n} modes, sigma in [{b.basis.sigmas[0]:.6g}, "
               f"{b.basis.sigmas[-1]:.6g}], max residual {b.basis.residuals.max():.2e}")


@main.command("tensors")
@click.option("--basis", "basis_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None)
@click.option("--ascii", "ascii_", is_flag=True, help="Write the ASCII container variant.")
@click.pass_context
def tensors_cmd(ctx, basis_path, out, ascii_):
    """Assemble the reduced-system tensors and write sys.bin."""
    from .pipeline import compute_system, load_basis, save_system

    out = _opt(ctx, "out", out) or "sys.bin"

    def work():
        bundle = load_basis(basis_path)
        s = compute_system(bundle)
        save_system(s, out, {"material": bundle.material.to_dict(), "mesh": bundle.mesh.meta},
                    "ascii" if ascii_ else "binary")
        return s

    s = _guard("tensors", work)
    click.echo(f"wrote {out}: n = {s.n}")


@main.command("simulate")
@click.option("--system", "system_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--init", "init_path", type=click.Path(dir_okay=False), default=None,
              help="Config with [initial], [integrator] and [outputs] tables.")
@click.option("--dt", type=float, default=None)
@click.option("--t-end", type=float, default=None)
@click.option("--out", "out", type=click.Path(file_okay=False), default=None)
@click.pass_context
def simulate_cmd(ctx, system_path, init_path, dt, t_end, out):
    """Integrate the reduced system; writes series.csv and summary.json."""
    from .pipeline import load_system, simulate

    def work():
        cfg = _load_config(init_path or ctx.obj["config"], ctx.obj["seed"])
        target = _opt(ctx, "out", out) or cfg.output_dir
        s, _ = load_system(system_path)
        _, summary = simulate(s, cfg, target, dt, t_end)
        return target, summary

    target, summary = _guard("simulate", work)
    click.echo(json.dumps(summary, sort_keys=True))
    click.echo(f"wrote {target}/series.csv")


@main.group("verify")
def verify_grp():
    """Invariant suites with JSON reports."""


def _report(report, out):
    text = json.dumps(report, indent=2, sort_keys=True, default=float)
    if out:
        Path(out).write_text(text + "\n")
    click.echo(text)
    if not report["passed"]:
        sys.exit(EXIT_INVARIANT)


@verify_grp.command("operators")
@click.option("--mesh", "mesh_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--samples", type=int, default=100, show_default=True)
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def verify_operators_cmd(ctx, mesh_path, config_path, samples, out):
    """Coercivity, symmetry and Korn checks on one mesh."""
    from .mesh import import_mesh
    from .pipeline import build_mesh
    from .verification import verify_operators

    ctx = ctx.find_root()

    def work():
        cfg = _load_config(_opt(ctx, "config", config_path), ctx.obj["seed"])
        mesh = import_mesh(mesh_path) if mesh_path else build_mesh(cfg)
        return verify_operators(mesh, cfg.material, samples, cfg.seed)

    _report(_guard("verify", work), _opt(ctx, "out", out))


@verify_grp.command("all")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def verify_all_cmd(ctx, config_path, out):
    """Every module's invariant suite for one configuration."""
    from .verification import verify_all

    ctx = ctx.find_root()

    def work():
        return verify_all(_load_config(_opt(ctx, "config", config_path), ctx.obj["seed"]))

    _report(_guard("verify", work), _opt(ctx, "out", out))


@verify_grp.command("file")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def verify_file_cmd(path):
    """Check the checksum of a basis or system container."""
    from . import container

    arrays, _ = _guard("verify", lambda: container.load(path))
    click.echo(json.dumps({"path": path, "arrays": sorted(arrays), "passed": True}))


@main.command("euler")
@click.option("--inertia", "inertia", type=str, required=True,
              help="Principal moments I1,I2,I3.")
@click.option("--omega0", type=str, required=True, help="Initial angular velocity.")
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--t-end", type=float, default=10.0, show_default=True)
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def euler_cmd(ctx, inertia, omega0, dt, t_end, out):
    """Torque-free rigid body (the fluid-free limit) by RK4."""
    import numpy as np

    from .integrator import euler_top

    out = _opt(ctx, "out", out) or "euler.csv"
    I = np.diag(_vector(inertia))
    Om0 = _vector(omega0)
    tr = _guard("euler", lambda: euler_top(I, Om0, dt, t_end))
    lines = ["t,Omega_x,Omega_y,Omega_z,energy,momentum"]
    for t, y in zip(tr.t, tr.y):
        e = y @ I @ y
        a = np.linalg.norm(I @ y)
        lines.append(",".join(repr(float(v)) for v in (t, *y, e, a)))
    Path(out).write_text("\n".join(lines) + "\n")
    click.echo(f"wrote {out}: {len(tr.t)} samples")


@main.command("run")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", "out", type=click.Path(file_okay=False), default=None)
@click.pass_context
def run_cmd(ctx, config_path, out):
    """Full pipeline: mesh, eig, tensors, simulate."""
    from .pipeline import run_scenario

    def work():
        cfg = _load_config(_opt(ctx, "config", config_path), ctx.obj["seed"],
                           _opt(ctx, "out", out))
        return cfg.output_dir, run_scenario(cfg, cfg.output_dir)

    target, summary = _guard("run", work)
    click.echo(json.dumps(summary, sort_keys=True))
    click.echo(f"artefacts in {target}")


if __name__ == "__main__":
    main()
