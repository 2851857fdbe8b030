"""Scenario configuration: TOML parsing, presets, validation and echo.

Example::

    seed = 0
    rho = 1.0
    mu = 0.05
    modes = 16

    [ball]
    radius = 0.5
    mass = 2.0

    [body]
    IB = [1.0, 1.5, 2.0]

    [mesh]
    outer = 1.0          # radius, or three semi-axes
    refinement = 1

    [integrator]
    dt = "auto"          # 0.1 / sigma_max
    t_end = 200.0

    [initial]
    preset = "counter-rotating"

    [outputs]
    cadence = 10         # steps between stored samples
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomlkit

from .errors import ConfigError, ParameterError
from .galerkin import MAX_MODES
from .inertia import MaterialConfig
from .integrator import METHODS

V0_PRESETS = ("rigid-interp", "zero")

DEFAULTS = {
    "seed": 0,
    "rho": 1.0,
    "mu": 0.05,
    "modes": 16,
    "ball": {"radius": 0.5, "mass": 2.0},
    "body": {"IB": [1.0, 1.5, 2.0]},
    "mesh": {"outer": 1.0, "refinement": 1, "quadrature_order": 2},
    "integrator": {"dt": "auto", "t_end": 200.0, "method": "rk4", "rtol": 1e-9, "atol": 1e-12,
                   "energy_guard": 1e-8},
    "initial": {"omega1_0": [0.0, 0.0, 1.0], "omega2_0": [0.0, 0.0, -1.0], "v0": "rigid-interp"},
    "outputs": {"directory": "run", "cadence": 10},
}

# a preset fills in values the config file leaves unset
PRESETS = {
    "counter-rotating": {
        "initial": {"omega1_0": [0.0, 0.0, 1.0], "omega2_0": [0.0, 0.0, -1.0],
                    "v0": "rigid-interp"},
    },
    "rest": {
        "initial": {"omega1_0": [0.0, 0.0, 0.0], "omega2_0": [0.0, 0.0, 0.0], "v0": "zero"},
    },
    "spherical-spin": {
        "body": {"IB": [1.0, 1.0, 1.0]},
        "mesh": {"outer": 1.0},
        "initial": {"omega1_0": [0.0, 0.0, 1.0], "omega2_0": [0.0, 0.0, 1.0], "v0": "zero"},
    },
}


@dataclass(frozen=True)
class MeshConfig:
    R_inner: float
    outer: object  # float or 3 semi-axes
    refinement: int
    quadrature_order: int = 2


@dataclass(frozen=True)
class InitialConfig:
    omega1_0: np.ndarray
    omega2_0: np.ndarray
    v0: object  # preset name or coefficient list

    @property
    def omega0(self):
        return self.omega2_0 - self.omega1_0


@dataclass(frozen=True)
class RunConfig:
    material: MaterialConfig
    mesh: MeshConfig
    modes: int
    integrator: dict
    initial: InitialConfig
    output_dir: str
    cadence: int
    seed: int
    raw: dict  # effective config after presets and defaults

    def echo(self) -> str:
        """TOML text that reproduces this configuration."""
        return tomlkit.dumps(self.raw)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_keys(d, allowed, where):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where or 'top level'}")


def _plain(obj):
    """tomlkit containers to plain dicts/lists/scalars."""
    if hasattr(obj, "unwrap"):
        return obj.unwrap()
    return obj


def _vec3(value, name):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be three numbers, got {value!r}") from None
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be three finite numbers, got {value!r}")
    return arr


def _number(value, name, positive=True):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return float(value)


def effective_config(user: dict) -> dict:
    """Defaults, then the chosen preset, then the user's own values."""
    user = _plain(user) or {}
    _check_keys(user, DEFAULTS, "")
    for section in ("ball", "body", "mesh", "integrator", "outputs"):
        if section in user:
            if not isinstance(user[section], dict):
                raise ConfigError(f"[{section}] must be a table")
            _check_keys(user[section], DEFAULTS[section], f"[{section}]")
    initial = user.get("initial", {})
    if not isinstance(initial, dict):
        raise ConfigError("[initial] must be a table")
    _check_keys(initial, list(DEFAULTS["initial"]) + ["preset"], "[initial]")
    merged = DEFAULTS
    preset = initial.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        merged = _merge(merged, PRESETS[preset])
    return _merge(merged, user)


def build_run_config(raw: dict) -> RunConfig:
    eff = effective_config(raw)
    try:
        material = MaterialConfig(rho=_number(eff["rho"], "rho"), mu=_number(eff["mu"], "mu"),
                                  R=_number(eff["ball"]["radius"], "ball.radius"),
                                  m_ball=_number(eff["ball"]["mass"], "ball.mass"),
                                  IB_eigs=tuple(_vec3(eff["body"]["IB"], "body.IB")))
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None

    m = eff["mesh"]
    outer = m["outer"]
    if isinstance(outer, list):
        outer_v = _vec3(outer, "mesh.outer")
        if np.any(outer_v <= material.R):
            raise ConfigError("mesh.outer semi-axes must exceed ball.radius")
    else:
        outer_v = _number(outer, "mesh.outer")
        if outer_v <= material.R:
            raise ConfigError("mesh.outer must exceed ball.radius")
    ref = m["refinement"]
    if isinstance(ref, bool) or not isinstance(ref, int) or ref < 0:
        raise ConfigError(f"mesh.refinement must be a nonnegative integer, got {ref!r}")
    qo = m["quadrature_order"]
    if isinstance(qo, bool) or not isinstance(qo, int) or qo < 1:
        raise ConfigError(f"mesh.quadrature_order must be a positive integer, got {qo!r}")
    mesh = MeshConfig(material.R, outer_v, ref, qo)

    modes = eff["modes"]
    if isinstance(modes, bool) or not isinstance(modes, int) or modes < 1:
        raise ConfigError(f"modes must be a positive integer, got {modes!r}")
    if modes > MAX_MODES:
        raise ConfigError(f"modes must be <= {MAX_MODES}, got {modes}")

    integ = dict(eff["integrator"])
    if integ["dt"] != "auto":
        integ["dt"] = _number(integ["dt"], "integrator.dt")
    integ["t_end"] = _number(integ["t_end"], "integrator.t_end")
    if integ["method"] not in METHODS:
        raise ConfigError(f"integrator.method must be one of {METHODS}")
    for k in ("rtol", "atol"):
        integ[k] = _number(integ[k], f"integrator.{k}")
    if integ["energy_guard"] is not False:
        integ["energy_guard"] = _number(integ["energy_guard"], "integrator.energy_guard")

    ini = eff["initial"]
    v0 = ini["v0"]
    if isinstance(v0, str):
        if v0 not in V0_PRESETS:
            raise ConfigError(f"initial.v0 must be one of {V0_PRESETS} or a coefficient list")
    else:
        try:
            v0 = [float(x) for x in v0]
        except (TypeError, ValueError):
            raise ConfigError(f"initial.v0 coefficient list is not numeric: {v0!r}") from None
        if len(v0) > modes:
            raise ConfigError(f"initial.v0 has {len(v0)} coefficients but modes = {modes}")
    initial = InitialConfig(_vec3(ini["omega1_0"], "initial.omega1_0"),
                            _vec3(ini["omega2_0"], "initial.omega2_0"), v0)

    out = eff["outputs"]
    cad = out["cadence"]
    if isinstance(cad, bool) or not isinstance(cad, int) or cad < 1:
        raise ConfigError(f"outputs.cadence must be a positive integer, got {cad!r}")
    seed = eff["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    return RunConfig(material, mesh, modes, integ, initial, str(out["directory"]), cad, seed, eff)


def parse_config(text: str) -> RunConfig:
    try:
        doc = tomlkit.parse(text)
    except Exception as exc:  # tomlkit raises several unrelated exception types
        raise ConfigError(f"invalid TOML: {exc}") from None
    return build_run_config(doc.unwrap())


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
