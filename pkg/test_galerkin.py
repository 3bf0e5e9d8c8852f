#!/usr/bin/env python3
"""
粗网格 Galerkin 演化测试
"""

import numpy as np
import pytest

from src.assembly import ConvectionMode, assemble_convection
from src.exact_solutions import exp1_solution, exp2_initial_velocity, steady_stokes_solution
from src.exceptions import InvalidArgumentError, NewtonConvergenceError
from src.fe_space import FEField, Family, FieldRole, build_space
from src.galerkin import (
    DIVERGENCE_TOL,
    EvolutionConfig,
    GalerkinEvolver,
    GalerkinState,
    evolve,
    recover_time_derivative,
    step_trapezoid,
)
from src.mesh import build_unit_square_mesh


@pytest.fixture
def coarse_space():
    return build_space(build_unit_square_mesh(4), Family.MINI)


def test_config_validation():
    assert EvolutionConfig(nu=0.05, dt=0.01, t_final=0.5).n_steps == 50
    cfg = EvolutionConfig(nu=0.05, dt=0.1, t_final=0.3)
    assert cfg.n_steps == 3
    assert cfg.time_of(3) == 0.3
    with pytest.raises(InvalidArgumentError):
        EvolutionConfig(nu=0.05, dt=0.2, t_final=0.5)
    with pytest.raises(InvalidArgumentError):
        EvolutionConfig(nu=0.0, dt=0.1, t_final=0.5)
    with pytest.raises(InvalidArgumentError):
        EvolutionConfig(nu=0.05, dt=-0.1, t_final=0.5)


def test_zero_state_stays_zero(coarse_space):
    cfg = EvolutionConfig(nu=0.05, dt=0.1, t_final=0.2)
    evolver = GalerkinEvolver(coarse_space, cfg)
    state = evolver.initial_state(lambda x, y: np.zeros((2,) + np.shape(x)))
    new_state, iterations = evolver.step(state, 1)
    assert iterations == 1
    assert new_state.t == pytest.approx(0.1)
    np.testing.assert_array_equal(new_state.u.coeffs, 0.0)
    np.testing.assert_allclose(new_state.p.coeffs, 0.0, atol=1e-15)


def test_linear_step_needs_one_newton_iteration(coarse_space):
    solution = steady_stokes_solution(1.0)
    cfg = EvolutionConfig(nu=1.0, dt=0.05, t_final=0.1, convection=False,
                          forcing=lambda x, y, t: solution.forcing(x, y))
    evolver = GalerkinEvolver(coarse_space, cfg)
    state = evolver.initial_state(lambda x, y: np.zeros((2,) + np.shape(x)))
    for n in (1, 2):
        state, iterations = evolver.step(state, n)
        assert iterations == 1
    assert state.t == pytest.approx(0.1)


def test_initial_state_is_discretely_divergence_free(coarse_space):
    cfg = EvolutionConfig(nu=0.01, dt=0.1, t_final=0.1)
    evolver = GalerkinEvolver(coarse_space, cfg)
    state = evolver.initial_state(exp2_initial_velocity)
    assert evolver.divergence_residual(state.u) <= 1e-10
    np.testing.assert_array_equal(state.p.coeffs, 0.0)


def test_run_with_manufactured_forcing(coarse_space):
    solution = exp1_solution(0.05)
    cfg = EvolutionConfig(nu=0.05, dt=0.1, t_final=0.2, forcing=solution.forcing)
    evolver = GalerkinEvolver(coarse_space, cfg)
    state = evolver.run(lambda x, y: solution.velocity(x, y, 0.0))

    assert state.t == pytest.approx(0.2)
    assert len(evolver.history) == cfg.n_steps + 1
    assert all(r.div_residual <= DIVERGENCE_TOL for r in evolver.history)
    assert all(r.newton_iters >= 1 for r in evolver.history[1:])
    assert state.udot is not None and state.p_consistent is not None

    # 恢复的 u̇ 与一致压力满足时刻 t 的半离散方程
    ops = evolver.ops
    u = state.u.coeffs
    N = assemble_convection(coarse_space, state.u, ConvectionMode.SKEW)
    load = evolver.load(state.t)
    residual = ops.M @ state.udot.coeffs + cfg.nu * (ops.K @ u) + N @ u \
        - ops.B.T @ state.p_consistent.coeffs - load
    assert np.abs(residual).max() <= 1e-8 * (1 + np.abs(load).max())
    assert np.abs(ops.B @ state.udot.coeffs).max() <= 1e-9


def test_module_level_helpers(coarse_space):
    solution = exp1_solution(0.05)
    cfg = EvolutionConfig(nu=0.05, dt=0.1, t_final=0.1, forcing=solution.forcing)
    final = evolve(lambda x, y: solution.velocity(x, y, 0.0), cfg, coarse_space)

    evolver = GalerkinEvolver(coarse_space, cfg)
    start = evolver.initial_state(lambda x, y: solution.velocity(x, y, 0.0))
    stepped = step_trapezoid(start, cfg, evolver)
    np.testing.assert_allclose(stepped.u.coeffs, final.u.coeffs, atol=1e-12)

    udot = recover_time_derivative(final, cfg)
    np.testing.assert_allclose(udot.coeffs, final.udot.coeffs, atol=1e-10)


def test_free_flow_energy_decays(coarse_space):
    cfg = EvolutionConfig(nu=1.0, dt=0.01, t_final=0.05)
    evolver = GalerkinEvolver(coarse_space, cfg)
    evolver.run(exp2_initial_velocity)
    assert evolver.history[-1].energy < evolver.history[0].energy


def test_free_flow_energy_never_increases():
    space = build_space(build_unit_square_mesh(10), Family.MINI)
    cfg = EvolutionConfig(nu=0.01, dt=0.005, t_final=0.1)
    evolver = GalerkinEvolver(space, cfg)
    evolver.run(exp2_initial_velocity)
    energies = [record.energy for record in evolver.history]
    assert len(energies) == cfg.n_steps + 1
    slack = 1e-10 * energies[0]
    for before, after in zip(energies, energies[1:]):
        assert after <= before + slack
    assert evolver.energy_violations == 0
    assert max(record.div_residual for record in evolver.history) <= DIVERGENCE_TOL


def test_newton_failure_reports_step(coarse_space):
    solution = exp1_solution(0.05)
    cfg = EvolutionConfig(nu=0.05, dt=0.1, t_final=0.2, forcing=solution.forcing,
                          newton_tol=1e-16, newton_max_iter=1)
    evolver = GalerkinEvolver(coarse_space, cfg)
    with pytest.raises(NewtonConvergenceError) as exc_info:
        evolver.run(lambda x, y: solution.velocity(x, y, 0.0))
    assert exc_info.value.step == 1
    assert exc_info.value.iterations == 1


def test_state_energy(coarse_space):
    cfg = EvolutionConfig(nu=0.01, dt=0.1, t_final=0.1)
    evolver = GalerkinEvolver(coarse_space, cfg)
    state = GalerkinState(t=0.0, u=FEField.zeros(coarse_space, FieldRole.VELOCITY),
                          p=FEField.zeros(coarse_space, FieldRole.PRESSURE))
    assert state.energy(evolver.ops.M) == 0.0
    assert state.space is coarse_space
