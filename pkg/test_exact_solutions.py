#!/usr/bin/env python3
"""
制造解测试：解析导数与有限差分一致、无散、边界为零
"""

import numpy as np
import pytest

from src.exact_solutions import (
    ManufacturedSolution,
    exp1_solution,
    exp2_initial_velocity,
    mms_forcing_exp1,
    steady_stokes_solution,
)

RNG = np.random.default_rng(2024)
X, Y = RNG.random(100), RNG.random(100)
T = RNG.random(100)
EPS = 1e-6


def fd_gradient(func, x, y):
    """中心差分 G[α, β] = ∂_β f_α"""
    dx = (func(x + EPS, y) - func(x - EPS, y)) / (2 * EPS)
    dy = (func(x, y + EPS) - func(x, y - EPS)) / (2 * EPS)
    return np.stack([dx, dy], axis=1)


def test_velocity_gradient_matches_finite_differences():
    solution = exp1_solution()
    t = 0.3
    fd = fd_gradient(lambda x, y: solution.velocity(x, y, t), X, Y)
    np.testing.assert_allclose(solution.velocity_gradient(X, Y, t), fd, atol=1e-6)


def test_laplacian_matches_finite_differences():
    solution = exp1_solution()
    grads = lambda x, y: solution.velocity_gradient(x, y, 1.0)  # noqa: E731
    dx = (grads(X + EPS, Y) - grads(X - EPS, Y)) / (2 * EPS)
    dy = (grads(X, Y + EPS) - grads(X, Y - EPS)) / (2 * EPS)
    laplacian = dx[:, 0] + dy[:, 1]
    np.testing.assert_allclose(solution.velocity_laplacian(X, Y, 1.0), laplacian, atol=1e-5)


def check_forcing_at(solution, nu, t):
    forcing = solution.forcing(X, Y, t)
    u = solution.velocity(X, Y, t)
    u_t = (solution.velocity(X, Y, t + EPS) - solution.velocity(X, Y, t - EPS)) / (2 * EPS)
    grad = fd_gradient(lambda x, y: solution.velocity(x, y, t), X, Y)
    g_dx = (solution.velocity_gradient(X + EPS, Y, t)
            - solution.velocity_gradient(X - EPS, Y, t)) / (2 * EPS)
    g_dy = (solution.velocity_gradient(X, Y + EPS, t)
            - solution.velocity_gradient(X, Y - EPS, t)) / (2 * EPS)
    laplacian = g_dx[:, 0] + g_dy[:, 1]
    p_x = (solution.pressure(X + EPS, Y, t) - solution.pressure(X - EPS, Y, t)) / (2 * EPS)
    p_y = (solution.pressure(X, Y + EPS, t) - solution.pressure(X, Y - EPS, t)) / (2 * EPS)
    convection = np.einsum('bp,abp->ap', u, grad)
    expected = u_t - nu * laplacian + convection + np.stack([p_x, p_y])
    scale = 1.0 + np.abs(expected).max()
    np.testing.assert_allclose(forcing, expected, atol=1e-6 * scale)


def test_forcing_matches_finite_difference_residual():
    """f = u_t - νΔu + (u·∇)u + ∇p，各项用有限差分独立计算"""
    nu = 0.05
    solution = exp1_solution(nu)
    for t in T[:10]:
        check_forcing_at(solution, nu, float(t))


@pytest.mark.parametrize("t", [0.0, 0.25, 1.0])
def test_exact_velocity_is_divergence_free(t):
    grad = exp1_solution().velocity_gradient(X, Y, t)
    np.testing.assert_allclose(grad[0, 0] + grad[1, 1], 0.0, atol=1e-12)


def test_zero_trace():
    s = np.linspace(0, 1, 25)
    edges = [(s, 0 * s), (s, 0 * s + 1), (0 * s, s), (0 * s + 1, s)]
    for x, y in edges:
        np.testing.assert_allclose(exp1_solution().velocity(x, y, 1.0), 0.0, atol=1e-12)
        np.testing.assert_allclose(exp2_initial_velocity(x, y), 0.0, atol=1e-12)


def test_exp2_initial_velocity_is_divergence_free():
    grad = fd_gradient(exp2_initial_velocity, X, Y)
    np.testing.assert_allclose(grad[0, 0] + grad[1, 1], 0.0, atol=1e-7)


def test_initial_forcing():
    """t = 0 时 u = 0，p = 0，f 只剩 u_t"""
    solution = exp1_solution()
    np.testing.assert_allclose(solution.velocity(X, Y, 0.0), 0.0)
    np.testing.assert_allclose(solution.forcing(X, Y, 0.0), solution.velocity(X, Y, 1.0),
                               atol=1e-14)
    np.testing.assert_allclose(mms_forcing_exp1(X, Y, 0.3), solution.forcing(X, Y, 0.3))


def test_steady_variants():
    stokes = steady_stokes_solution(1.0)
    np.testing.assert_allclose(stokes.velocity(X, Y, 5.0), stokes.velocity(X, Y, 0.0))
    expected = -stokes.velocity_laplacian(X, Y) + stokes.pressure_gradient(X, Y)
    np.testing.assert_allclose(stokes.forcing(X, Y), expected)
    oseen = ManufacturedSolution(nu=1.0, steady=True, convection=True)
    diff = oseen.forcing(X, Y) - stokes.forcing(X, Y)
    convection = np.einsum('bp,abp->ap', stokes.velocity(X, Y), stokes.velocity_gradient(X, Y))
    np.testing.assert_allclose(diff, convection, atol=1e-12)


def test_forcing_regression_value():
    # u = t·U，ν = 0.05：f = U - νtΔU + t²(U·∇)U + ∇p，在 (0.3, 0.7, 0.5) 处手算
    f = mms_forcing_exp1(0.3, 0.7, 0.5)
    assert f.shape == (2,)
    np.testing.assert_allclose(f, [6.1749603, -9.7574587], rtol=1e-5)
    np.testing.assert_array_equal(exp1_solution(0.05).forcing(0.3, 0.7, 0.5), f)
