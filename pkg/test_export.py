#!/usr/bin/env python3
"""
CSV 与纯文本输出测试
"""

import numpy as np
import pytest
import pandas as pd
import scipy.sparse as sp

from src.assembly import assemble_operators
from src.export import (
    ERRORS_COLUMNS,
    grid_points,
    sample_fields,
    write_errors,
    write_frame,
    write_matrix,
    write_mesh,
    write_time_series,
)
from src.fe_space import Family, FieldRole, build_space, interpolate
from src.galerkin import StepRecord
from src.mesh import build_unit_square_mesh
from src.norms import ErrorReport


def reports():
    return [
        ErrorReport(method=method, H=1 / 6, h=h, nu=0.05, t=0.5, err_u_L2=1e-3 * k,
                    err_u_H1=1e-2 * k, err_p_L2=2e-3 * k, err_u1_L2=1e-3 * k,
                    err_u1_H1=1e-2 * k)
        for k, (method, h) in enumerate([("galerkin", 1 / 6), ("postprocessed", 1 / 20)], 1)
    ]


def test_errors_csv(tmp_path):
    path = tmp_path / "out" / "errors.csv"
    write_errors(reports(), path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ERRORS_COLUMNS
    assert list(frame["method"]) == ["galerkin", "postprocessed"]
    assert frame["h"].iloc[1] == pytest.approx(1 / 20, rel=1e-15)

    again = tmp_path / "again.csv"
    write_errors(reports(), again)
    assert path.read_bytes() == again.read_bytes()
    assert "e-02" in path.read_text(encoding="utf-8")


def test_write_to_stdout(capsys):
    assert write_frame(pd.DataFrame({"a": [1.5]}), "-") is None
    out = capsys.readouterr().out
    assert out.splitlines() == ["a", "1.50000000000000000e+00"]


def test_time_series(tmp_path):
    path = tmp_path / "series.csv"
    write_time_series([StepRecord(0.0, 1.0, 0, 0.0), StepRecord(0.01, 0.9, 3, 1e-13)], path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["t", "energy", "newton_iters", "div_residual"]
    assert list(frame["newton_iters"]) == [0, 3]


def test_mesh_dump(tmp_path):
    path = write_mesh(build_unit_square_mesh(2), tmp_path / "mesh.txt")
    lines = path.read_text(encoding="utf-8").splitlines()
    vertices = [line for line in lines if line.startswith("v ")]
    triangles = [line for line in lines if line.startswith("t ")]
    assert len(vertices) == 9
    assert len(triangles) == 8
    assert lines[:9] == vertices
    for line in triangles:
        assert all(0 <= int(i) < 9 for i in line.split()[1:])


def test_matrix_dump(tmp_path):
    space = build_space(build_unit_square_mesh(2), Family.TAYLOR_HOOD)
    M = assemble_operators(space).M
    path = write_matrix(M, tmp_path / "M.txt")
    rows = np.loadtxt(path)
    assert rows.shape == (sp.csr_matrix(M).nnz, 3)
    rebuilt = sp.coo_matrix((rows[:, 2], (rows[:, 0].astype(int), rows[:, 1].astype(int))),
                            shape=M.shape)
    assert abs(rebuilt - M).max() == 0.0


def test_grid_order():
    points = grid_points(3)
    np.testing.assert_allclose(points[:3], [[0, 0], [0.5, 0], [1, 0]])
    np.testing.assert_allclose(points[-1], [1, 1])


def test_sample_fields():
    space = build_space(build_unit_square_mesh(4), Family.MINI)
    bump = lambda x, y: x * (1 - x) * y * (1 - y)
    u = interpolate(space, FieldRole.VELOCITY, lambda x, y: np.stack([bump(x, y), -bump(x, y)]))
    p = interpolate(space, FieldRole.PRESSURE, lambda x, y: x + y)
    frame = sample_fields({"g": u, "g2": p}, 5)
    assert list(frame.columns) == ["x", "y", "g_u1", "g_u2", "g2_p"]
    assert len(frame) == 25
    # 采样点与网格顶点重合
    np.testing.assert_allclose(frame["g_u1"], bump(frame["x"], frame["y"]), atol=1e-12)
    np.testing.assert_allclose(frame["g_u2"], -frame["g_u1"], atol=1e-12)
    np.testing.assert_allclose(frame["g2_p"], frame["x"] + frame["y"], atol=1e-12)
