#!/usr/bin/env python3
"""
误差范数与收敛阶拟合测试
"""

import math

import numpy as np
import pytest

from src.assembly import assemble_operators
from src.exact_solutions import steady_stokes_solution
from src.exceptions import InvalidArgumentError, NumericalError
from src.fe_space import FEField, Family, FieldRole, build_space, interpolate
from src.mesh import build_unit_square_mesh
from src.norms import (
    DiscreteReference,
    ErrorReport,
    SlopeTable,
    compute_errors,
    pressure_error,
    slope_fit,
    velocity_errors,
)

SOLUTION = steady_stokes_solution(1.0)


def interpolated_pair(n, family=Family.MINI):
    space = build_space(build_unit_square_mesh(n), family)
    u = interpolate(space, FieldRole.VELOCITY, lambda x, y: SOLUTION.velocity(x, y))
    p = interpolate(space, FieldRole.PRESSURE, lambda x, y: SOLUTION.pressure(x, y))
    return u, p


def make_report(method, H, value):
    return ErrorReport(method=method, H=H, h=H / 3, nu=0.05, t=0.5,
                       err_u_L2=value, err_u_H1=value, err_p_L2=value,
                       err_u1_L2=value, err_u1_H1=value)


@pytest.mark.parametrize("order", [1.0, 2.0, 1.5])
def test_slope_fit_exact_power_law(order):
    sizes = [1 / 6, 1 / 8, 1 / 10, 1 / 12]
    assert slope_fit([(H, 3.7 * H ** order) for H in sizes]) == pytest.approx(order, abs=1e-12)


def test_slope_fit_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        slope_fit([(0.5, 1.0), (0.25, 0.5)])
    with pytest.raises(InvalidArgumentError):
        slope_fit([(0.5, 1.0), (0.25, 0.0), (0.125, 0.1)])
    with pytest.raises(InvalidArgumentError):
        slope_fit([(0.5, 1.0), (0.5, 0.5), (0.5, 0.1)])


def test_pressure_error_ignores_constants():
    u, p = interpolated_pair(6)
    shifted = p.copy_with(p.coeffs + 5.0)
    assert pressure_error(shifted, SOLUTION, 0.0) == pytest.approx(
        pressure_error(p, SOLUTION, 0.0), abs=1e-12)


def test_interpolation_errors_decrease_with_refinement():
    coarse = compute_errors(interpolated_pair(4), SOLUTION, 0.0)
    fine = compute_errors(interpolated_pair(8), SOLUTION, 0.0)
    assert coarse.err_u_L2 / fine.err_u_L2 > 2.0
    assert coarse.err_u_H1 / fine.err_u_H1 > 1.5
    assert coarse.err_p_L2 / fine.err_p_L2 > 2.0
    assert fine.err_u1_L2 <= fine.err_u_L2
    assert fine.err_u1_H1 <= fine.err_u_H1


def test_full_h1_norm_includes_l2_part():
    u, _ = interpolated_pair(5)
    errors = velocity_errors(u, SOLUTION, 0.0)
    assert errors['err_u_H1'] >= errors['err_u_L2']


def test_discrete_reference_of_itself():
    u, p = interpolated_pair(4, Family.TAYLOR_HOOD)
    report = compute_errors((u, p), DiscreteReference(u, p), 0.5, method="self")
    assert report.err_u_L2 == pytest.approx(0.0, abs=1e-12)
    assert report.err_u_H1 == pytest.approx(0.0, abs=1e-10)
    assert report.err_p_L2 == pytest.approx(0.0, abs=1e-12)
    assert report.method == "self"


def test_discrete_reference_without_pressure():
    u, p = interpolated_pair(4)
    reference = DiscreteReference(u)
    x = np.array([[0.2, 0.4], [0.6, 0.8]])
    assert reference.velocity(x, x.T).shape == (2, 2, 2)
    assert reference.velocity_gradient(x, x.T).shape == (2, 2, 2, 2)
    np.testing.assert_array_equal(reference.pressure(x, x.T), 0.0)


def test_compute_errors_argument_order():
    u, p = interpolated_pair(3)
    with pytest.raises(InvalidArgumentError):
        compute_errors((p, u), SOLUTION, 0.0)


def test_error_report_validation():
    with pytest.raises(NumericalError):
        make_report("galerkin", 0.1, -1.0)
    with pytest.raises(NumericalError):
        make_report("galerkin", 0.1, math.nan)
    row = make_report("galerkin", 0.1, 0.5).to_row()
    assert list(row)[:5] == ["method", "H", "h", "nu", "t"]


def test_slope_table():
    sizes = [1 / 6, 1 / 8, 1 / 10]
    reports = [make_report("galerkin", H, H) for H in sizes] + \
        [make_report("postprocessed", H, H ** 2) for H in sizes] + \
        [make_report("partial", 0.5, 0.1)]
    table = SlopeTable.from_reports(reports)
    assert table.get("galerkin", "err_u_H1") == pytest.approx(1.0)
    assert table.get("postprocessed", "err_p_L2") == pytest.approx(2.0)
    with pytest.raises(InvalidArgumentError):
        table.get("partial", "err_u_L2")
    rows = table.rows()
    assert len(rows) == 10
    assert rows[0]["method"] == "galerkin"

    by_h = SlopeTable.from_reports(reports, norms=["err_u_L2"], size_attr="h")
    assert by_h.get("postprocessed", "err_u_L2") == pytest.approx(2.0)


def test_vector_norms_match_assembled_operators():
    u, _ = interpolated_pair(4, Family.TAYLOR_HOOD)
    ops = assemble_operators(u.space)
    errors = velocity_errors(FEField.zeros(u.space, FieldRole.VELOCITY), DiscreteReference(u), 0.0)
    l2_sq = float(u.coeffs @ (ops.M @ u.coeffs))
    semi_sq = float(u.coeffs @ (ops.K @ u.coeffs))
    assert errors['err_u_L2'] ** 2 == pytest.approx(l2_sq, rel=1e-10)
    assert errors['err_u_H1'] ** 2 == pytest.approx(l2_sq + semi_sq, rel=1e-10)
    assert errors['err_u1_L2'] < errors['err_u_L2']
