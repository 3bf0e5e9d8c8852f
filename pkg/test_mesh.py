#!/usr/bin/env python3
"""
网格模块测试

构造计数、面积、边界标记、点定位与仿射数据
"""

import numpy as np
import pytest

from src.exceptions import InvalidArgumentError, OutOfDomainError
from src.mesh import build_unit_square_mesh, locate_point, locate_points, triangle_affine_data


@pytest.mark.parametrize("n, n_vertices, n_triangles", [(1, 4, 2), (6, 49, 72), (10, 121, 200)])
def test_counts(n, n_vertices, n_triangles):
    """顶点数 (N+1)²，三角形数 2N²"""
    mesh = build_unit_square_mesh(n)
    assert mesh.n_vertices == n_vertices
    assert mesh.n_triangles == n_triangles
    assert mesh.h == pytest.approx(1.0 / n)


def test_areas_tile_unit_square():
    mesh = build_unit_square_mesh(10)
    np.testing.assert_allclose(mesh.areas, 1.0 / 200, rtol=1e-14)
    assert mesh.areas.sum() == pytest.approx(1.0, abs=1e-13)


def test_edge_sharing():
    """内部边属于两个三角形，边界边属于一个"""
    n = 5
    mesh = build_unit_square_mesh(n)
    assert mesh.n_edges == 3 * n * n + 2 * n
    assert mesh.boundary_edge.sum() == 4 * n
    np.testing.assert_array_equal(mesh.edge_triangle_count[mesh.boundary_edge], 1)
    np.testing.assert_array_equal(mesh.edge_triangle_count[~mesh.boundary_edge], 2)


def test_boundary_vertex_flags():
    mesh = build_unit_square_mesh(7)
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    expected = (x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0)
    np.testing.assert_array_equal(mesh.boundary_vertex, expected)
    assert (~mesh.boundary_vertex).sum() == 36


def test_invalid_subdivision():
    for bad in (0, -3, 2.5, True):
        with pytest.raises(InvalidArgumentError):
            build_unit_square_mesh(bad)


def test_construction_is_deterministic():
    a = build_unit_square_mesh(4)
    b = build_unit_square_mesh(4)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.triangles, b.triangles)


def test_locate_corner():
    mesh = build_unit_square_mesh(4)
    k, lam = locate_point(mesh, (0.0, 0.0))
    assert k == 0
    np.testing.assert_allclose(lam, [1.0, 0.0, 0.0], atol=1e-15)


def test_locate_far_corner():
    mesh = build_unit_square_mesh(4)
    k, lam = locate_point(mesh, (1.0, 1.0))
    np.testing.assert_allclose(lam, [0.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(mesh.vertices[mesh.triangles[k][2]], [1.0, 1.0])


def test_locate_barycenters():
    mesh = build_unit_square_mesh(3)
    centers = mesh.vertices[mesh.triangles].mean(axis=1)
    triangles, lam = locate_points(mesh, centers)
    np.testing.assert_array_equal(triangles, np.arange(mesh.n_triangles))
    np.testing.assert_allclose(lam, 1.0 / 3.0, atol=1e-13)


def test_diagonal_goes_to_lower_triangle():
    mesh = build_unit_square_mesh(2)
    k, lam = locate_point(mesh, (0.25, 0.25))
    assert k == 0
    assert np.isclose(lam, 0.0, atol=1e-15).sum() == 1
    np.testing.assert_allclose(lam, [0.5, 0.0, 0.5], atol=1e-15)


def test_locate_roundtrip_random_points():
    rng = np.random.default_rng(42)
    mesh = build_unit_square_mesh(9)
    points = rng.random((500, 2))
    triangles, lam = locate_points(mesh, points)
    assert lam.min() >= -1e-12
    np.testing.assert_allclose(lam.sum(axis=1), 1.0, atol=1e-14)
    corners = mesh.vertices[mesh.triangles[triangles]]
    np.testing.assert_allclose(np.einsum("pk,pkd->pd", lam, corners), points, atol=1e-13)


def test_locate_outside_domain():
    mesh = build_unit_square_mesh(3)
    with pytest.raises(OutOfDomainError):
        locate_point(mesh, (1.1, 0.5))
    with pytest.raises(OutOfDomainError):
        locate_point(mesh, (0.5, -1e-6))
    # 容差之内的点仍可定位
    k, _ = locate_point(mesh, (1.0 + 1e-13, 0.5))
    assert 0 <= k < mesh.n_triangles


def test_triangle_affine_data():
    n = 6
    mesh = build_unit_square_mesh(n)
    for k in (0, 1, mesh.n_triangles - 1):
        corners, grads, area = triangle_affine_data(mesh, k)
        assert corners.shape == (3, 2)
        np.testing.assert_allclose(grads.sum(axis=0), 0.0, atol=1e-14)
        assert set(np.round(np.abs(grads.ravel())).astype(int)) <= {0, n}
        assert area == pytest.approx(1.0 / (2 * n * n))
    with pytest.raises(InvalidArgumentError):
        triangle_affine_data(mesh, mesh.n_triangles)
