from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapspin.discretization import (ConstrainedSpace, assemble_B_mass, assemble_dissipation,
                                    assemble_weighted_mass, divergence_free_dimension,
                                    project_field, solve_eigenbasis)
from gapspin.errors import ParameterError
from gapspin.operators import WeightedProducts

from conftest import TRIAXIAL, Setup

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_embedded_fields_satisfy_traces(tri0, seed):
    space = tri0.space
    x = np.random.default_rng(seed).standard_normal(space.dim)
    w = space.embed(x)
    assert space.constraint_residual(w) < 1e-14
    assert np.array_equal(space.restrict(w), x)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_quadratic_forms_match_operators(tri0, seed):
    space, model = tri0.space, tri0.model
    P = WeightedProducts(model, space.full)
    x = np.random.default_rng(seed).standard_normal(space.dim)
    w = space.embed(x)
    MB = assemble_B_mass(space, model)
    M = assemble_weighted_mass(space, model)
    assert x @ (M @ x) == pytest.approx(P.norm2(w), rel=1e-12)
    assert x @ (MB @ x) == pytest.approx(P.energy(w), rel=1e-10)


def test_mass_matrices_symmetric_positive(tri0):
    space, model = tri0.space, tri0.model
    M = assemble_weighted_mass(space, model)
    assert abs(M - M.T).max() < 1e-14 * abs(M).max()
    A = assemble_dissipation(space, 0.05)
    assert abs(A - A.T).max() < 1e-14 * abs(A).max()
    MB = assemble_B_mass(space, model)
    corr = MB.correction()
    assert np.linalg.matrix_rank(corr, tol=1e-12 * np.abs(corr).max()) == 3
    # B-mass stays positive: smallest generalised ratio in the span of the correction
    x = np.random.default_rng(0).standard_normal((space.dim, 5))
    assert np.all(np.einsum("ij,ij->j", x, MB @ x) > 0)


def test_rigid_motion_has_zero_dissipation(tri0):
    # the globally rigid field has zero strain
    space = tri0.space
    xi = np.array([0.1, 0.4, -0.3])
    P = WeightedProducts(tri0.model, space.full)
    U = P.rigid(xi).v_dofs
    S = space.full.strain
    assert U @ (S @ U) < 1e-12 * abs(S).max() * (U @ U)


def test_divergence_free_dimension_matches_rank_count(tri0):
    space = tri0.space
    dim, rank = divergence_free_dimension(space)
    # pressures are determined up to a constant
    assert rank == space.div_matrix.shape[0] - 1
    assert dim == space.dim - rank


def test_eigenbasis_properties(tri0):
    basis, space, model = tri0.basis, tri0.space, tri0.model
    MB = assemble_B_mass(space, model)
    G = basis.coeffs.T @ (MB @ basis.coeffs)
    assert np.abs(G - np.eye(basis.n)).max() < 1e-10
    A = assemble_dissipation(space, 0.05)
    assert np.allclose(basis.coeffs.T @ (A @ basis.coeffs), np.diag(basis.sigmas),
                       atol=1e-10 * basis.sigmas.max())
    assert np.all(basis.sigmas > 0) and np.all(np.diff(basis.sigmas) >= 0)
    assert basis.residuals.max() < 1e-8
    assert np.abs(space.div_matrix @ basis.coeffs).max() < 1e-10
    for w in basis.modes[:3]:
        assert space.constraint_residual(w) < 1e-13


def test_eigenbasis_is_reproducible(tri0):
    again = solve_eigenbasis(tri0.space, tri0.model, 0.05, 4)
    assert np.array_equal(again.sigmas, solve_eigenbasis(tri0.space, tri0.model, 0.05, 4).sigmas)
    assert np.allclose(again.sigmas, tri0.basis.sigmas[:4], rtol=1e-9)


def test_sigmas_scale_with_viscosity(tri0):
    b2 = solve_eigenbasis(tri0.space, tri0.model, 0.1, 3)
    assert np.allclose(b2.sigmas, 2 * tri0.basis.sigmas[:3], rtol=1e-9)


def test_projection_of_a_mode_recovers_its_coefficient(tri0):
    basis = tri0.basis
    MB = assemble_B_mass(tri0.space, tri0.model)
    c = basis.coeffs.T @ (MB @ basis.coeffs[:, 2])
    expect = np.zeros(basis.n)
    expect[2] = 1.0
    assert np.allclose(c, expect, atol=1e-10)


def test_projection_of_zero_field(tri0):
    w, c, x = project_field(tri0.basis, tri0.model, lambda X: np.zeros_like(X), np.zeros(3))
    assert np.all(c == 0) and np.all(x == 0)


def test_projection_is_energy_contracting(tri0):
    P = WeightedProducts(tri0.model, tri0.space.full)
    v0 = lambda X: np.stack([X[:, 1], -X[:, 0], 0 * X[:, 2]], axis=1)
    w, c, x = project_field(tri0.basis, tri0.model, v0, np.array([0.0, 0.0, -1.0]))
    assert c @ c == pytest.approx(P.energy(w), rel=1e-9)
    assert c @ c <= P.energy(tri0.space.embed(x)) * (1 + 1e-12)


def test_invalid_mode_counts(tri0):
    with pytest.raises(ParameterError):
        solve_eigenbasis(tri0.space, tri0.model, 0.05, 0)
    with pytest.raises(ParameterError):
        solve_eigenbasis(tri0.space, tri0.model, 0.05, 10**7)


def test_ellipsoidal_basis(ellip0):
    b = ellip0.basis
    assert b.n == 8 and np.all(b.sigmas > 0) and b.residuals.max() < 1e-8
    assert isinstance(ellip0.space, ConstrainedSpace)


@pytest.mark.slow
def test_sigmas_converge_under_refinement():
    # each of the 16 sigmas moves by under 5% between refinements 1 and 2
    coarse = Setup(TRIAXIAL, 1).basis.sigmas
    fine = Setup(TRIAXIAL, 2).basis.sigmas
    change = np.abs(fine - coarse) / fine
    assert np.all(fine < coarse)
    assert change[:3].max() < 0.05
    assert change.max() < 0.05, f"relative changes {np.round(change, 4)}"
