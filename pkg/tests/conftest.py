from __future__ import annotations

import numpy as np
import pytest

from gapspin.discretization import ConstrainedSpace, solve_eigenbasis
from gapspin.galerkin import assemble_tensors
from gapspin.inertia import MaterialConfig, build_inertia_model
from gapspin.mesh import generate_annulus_mesh

# acceptance verdicts, printed by the terminal summary hook
RESULTS: dict = {}

TRIAXIAL = MaterialConfig(rho=1.0, mu=0.05, R=0.5, m_ball=2.0, IB_eigs=(1.0, 1.5, 2.0))
SPHERICAL = MaterialConfig(rho=1.0, mu=0.05, R=0.5, m_ball=2.0, IB_eigs=(1.0, 1.0, 1.0))


class Setup:
    """Mesh, model, space, basis and reduced system for one configuration."""

    def __init__(self, material, refinement, n_modes=16, outer=1.0):
        self.material = material
        self.mesh = generate_annulus_mesh(material.R, outer, refinement)
        self.model = build_inertia_model(material, self.mesh)
        self.space = ConstrainedSpace(self.mesh)
        self.basis = solve_eigenbasis(self.space, self.model, material.mu, n_modes)
        self._system = None

    @property
    def system(self):
        if self._system is None:
            self._system = assemble_tensors(self.basis, self.model, self.material.mu)
        return self._system


@pytest.fixture(scope="session")
def shell0():
    return generate_annulus_mesh(0.5, 1.0, 0)


@pytest.fixture(scope="session")
def shell1():
    return generate_annulus_mesh(0.5, 1.0, 1)


@pytest.fixture(scope="session")
def tri0():
    return Setup(TRIAXIAL, 0)


@pytest.fixture(scope="session")
def sph0():
    return Setup(SPHERICAL, 0)


@pytest.fixture(scope="session")
def ellip0():
    return Setup(TRIAXIAL, 0, n_modes=8, outer=(1.0, 0.9, 0.8))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        passed, detail = RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {key:2d}: {detail}")
