#!/usr/bin/env python3
"""
鞍点系统求解测试
"""

import numpy as np
import pytest
import scipy.sparse as sp

from src.assembly import assemble_load, assemble_operators
from src.exact_solutions import steady_stokes_solution
from src.exceptions import InvalidArgumentError, SolverError
from src.fe_space import Family, FEField, FieldRole, build_space, pressure_mean
from src.mesh import build_unit_square_mesh
from src.saddle_solver import (
    LerayProjector,
    SaddleFactorization,
    SaddleSystem,
    coercivity_witness,
    leray_project,
    solve_saddle,
)


@pytest.fixture(params=list(Family), ids=lambda f: f.value)
def stokes_setup(request):
    space = build_space(build_unit_square_mesh(6), request.param)
    ops = assemble_operators(space)
    solution = steady_stokes_solution(1.0)
    load = assemble_load(space, lambda x, y: solution.forcing(x, y))
    return space, ops, load


def test_stokes_solution_properties(stokes_setup):
    space, ops, load = stokes_setup
    system = SaddleSystem(space, ops.K, ops.B, ops.m_p, load)
    u, p, multiplier = solve_saddle(system)
    assert np.abs(ops.B @ u.coeffs).max() <= 1e-10
    assert pressure_mean(p) == pytest.approx(0.0, abs=1e-12)
    # 动量方程残差
    residual = ops.K @ u.coeffs - ops.B.T @ p.coeffs - load
    assert np.abs(residual).max() <= 1e-9 * (1 + np.abs(load).max())
    assert abs(multiplier) <= 1e-8


def test_factorization_reuse(stokes_setup):
    space, ops, load = stokes_setup
    factorization = SaddleFactorization(SaddleSystem(space, ops.K, ops.B, ops.m_p, load))
    first = factorization.solve()
    doubled = factorization.solve(2.0 * load)
    np.testing.assert_allclose(doubled.velocity.coeffs, 2.0 * first.velocity.coeffs, atol=1e-12)


def test_dimension_mismatch():
    space = build_space(build_unit_square_mesh(3), Family.MINI)
    ops = assemble_operators(space)
    with pytest.raises(InvalidArgumentError):
        SaddleSystem(space, ops.K[:-1, :-1], ops.B, ops.m_p, np.zeros(space.n_u))
    with pytest.raises(InvalidArgumentError):
        SaddleSystem(space, ops.K, ops.B, ops.m_p, np.zeros(space.n_u - 1))


def test_singular_system_raises():
    space = build_space(build_unit_square_mesh(2), Family.MINI)
    ops = assemble_operators(space)
    A = sp.csr_matrix((space.n_u, space.n_u))
    f = np.random.default_rng(0).standard_normal(space.n_u)
    with pytest.raises(SolverError):
        solve_saddle(SaddleSystem(space, A, ops.B, ops.m_p, f))


def test_leray_projection(stokes_setup):
    space, ops, _ = stokes_setup
    rng = np.random.default_rng(4)
    v = FEField(space, FieldRole.VELOCITY, rng.standard_normal(space.n_u))
    projector = LerayProjector(ops)
    w = projector.project(v)
    assert np.abs(ops.B @ w.coeffs).max() <= 1e-10
    np.testing.assert_allclose(projector.project(w).coeffs, w.coeffs, atol=1e-10)
    np.testing.assert_allclose(leray_project(space, v, ops).coeffs, w.coeffs, atol=1e-12)

    # M-正交性：(v - w) 与离散无散场 M-正交
    other = projector.project_coeffs(rng.standard_normal(space.n_u))
    assert abs((v.coeffs - w.coeffs) @ (ops.M @ other)) <= 1e-10


def test_leray_rejects_foreign_field():
    space = build_space(build_unit_square_mesh(3), Family.MINI)
    other = build_space(build_unit_square_mesh(3), Family.MINI)
    projector = LerayProjector(assemble_operators(space))
    with pytest.raises(InvalidArgumentError):
        projector.project(FEField.zeros(other, FieldRole.VELOCITY))


def test_coercivity_witness_for_pure_diffusion():
    space = build_space(build_unit_square_mesh(4), Family.MINI)
    ops = assemble_operators(space)
    witness = coercivity_witness(ops, 0.1 * ops.K, 0.1, samples=5)
    assert witness.samples == 5
    assert witness.min_ratio == pytest.approx(1.0)
    assert witness.holds
