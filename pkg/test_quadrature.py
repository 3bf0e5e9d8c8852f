#!/usr/bin/env python3
"""
积分规则测试
"""

import math

import numpy as np
import pytest

from src.exceptions import InvalidArgumentError, NumericalError
from src.mesh import build_unit_square_mesh
from src.quadrature import (
    MAX_DEGREE,
    integrate_on_triangle,
    integrate_over_mesh,
    rule_for_degree,
)


@pytest.mark.parametrize("d", range(1, MAX_DEGREE + 1))
def test_moment_exactness(d):
    """Σ w λ1^a λ2^b λ3^c = a! b! c! 2! / (a+b+c+2)!"""
    rule = rule_for_degree(d)
    assert rule.degree >= d
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    l1, l2, l3 = rule.points.T
    for a in range(rule.degree + 1):
        for b in range(rule.degree + 1 - a):
            for c in range(rule.degree + 1 - a - b):
                exact = 2.0 * math.factorial(a) * math.factorial(b) * math.factorial(c) \
                    / math.factorial(a + b + c + 2)
                approx = float(rule.weights @ (l1 ** a * l2 ** b * l3 ** c))
                assert approx == pytest.approx(exact, rel=1e-13)


def test_reference_examples():
    """参考三角形面积 1/2：∫1 = 1/2，∫λ1² = 1/12，∫27λ1λ2λ3 = 9/40"""
    rule = rule_for_degree(3)
    l1, l2, l3 = rule.points.T
    assert 0.5 * rule.weights.sum() == pytest.approx(0.5)
    assert 0.5 * float(rule.weights @ l1 ** 2) == pytest.approx(1.0 / 12)
    assert 0.5 * float(rule.weights @ (27 * l1 * l2 * l3)) == pytest.approx(9.0 / 40)


@pytest.mark.parametrize("d", [0, 11, 2.5])
def test_degree_out_of_range(d):
    with pytest.raises(InvalidArgumentError):
        rule_for_degree(d)


def test_integrate_on_triangle():
    n = 4
    mesh = build_unit_square_mesh(n)
    rule = rule_for_degree(2)
    area = 1.0 / (2 * n * n)
    assert integrate_on_triangle(mesh, 5, rule, lambda x, y: np.ones_like(x)) == pytest.approx(area)
    # 三角形 0 的顶点为 (0,0), (h,0), (h,h)，λ1 = 1 - N x
    assert integrate_on_triangle(mesh, 0, rule, lambda x, y: 1.0 - n * x) \
        == pytest.approx(area / 3.0)


def test_non_finite_integrand_reports_triangle():
    mesh = build_unit_square_mesh(2)
    rule = rule_for_degree(1)
    with pytest.raises(NumericalError) as exc_info:
        integrate_on_triangle(mesh, 3, rule, lambda x, y: np.full_like(x, np.nan))
    assert exc_info.value.triangle == 3


def test_composite_trigonometric_integral():
    mesh = build_unit_square_mesh(32)
    value = integrate_over_mesh(
        mesh, rule_for_degree(10),
        lambda x, y: np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2
    )
    assert value == pytest.approx(0.25, abs=1e-6)


def test_composite_polynomial_is_exact():
    """∫∫ x³ y² = 1/12，5 次规则精确"""
    mesh = build_unit_square_mesh(3)
    value = integrate_over_mesh(mesh, rule_for_degree(5), lambda x, y: x ** 3 * y ** 2)
    assert value == pytest.approx(1.0 / 12, abs=1e-12)
