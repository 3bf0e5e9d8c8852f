"""
结构化三角网格模块

单位正方形 [0,1]^2 上由节点 (i/N, j/N) 生成的规则三角剖分，
每个小正方形沿左下到右上的对角线剖分为两个三角形。
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .exceptions import InvalidArgumentError, OutOfDomainError

# 点定位容差
DOMAIN_TOL = 1e-12
DIAGONAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StructuredTriMesh:
    """结构化三角网格

    顶点编号 v = j*(N+1) + i，坐标 (i/N, j/N)。
    小正方形 (i, j) 对应三角形 2*(j*N+i)（对角线下方）和 2*(j*N+i)+1（上方）。
    """
    n_subdiv: int
    vertices: np.ndarray          # (nv, 2)
    triangles: np.ndarray         # (nt, 3)，逆时针
    edges: np.ndarray             # (ne, 2)，顶点编号升序
    edge_midpoints: np.ndarray    # (ne, 2)
    triangle_edges: np.ndarray    # (nt, 3)，局部边 k 与局部顶点 k 相对
    boundary_vertex: np.ndarray   # (nv,) bool
    boundary_edge: np.ndarray     # (ne,) bool
    areas: np.ndarray             # (nt,)
    grad_lambda: np.ndarray       # (nt, 3, 2)，重心坐标梯度（常数）
    edge_triangle_count: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        """网格尺寸 1/N"""
        return 1.0 / self.n_subdiv

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def quadrature_points(self, bary_points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """所有三角形上映射后的积分点坐标

        Args:
            bary_points: 参考单元上的重心坐标 (nq, 3)

        Returns:
            (x, y)，形状均为 (nt, nq)
        """
        corners = self.vertices[self.triangles]  # (nt, 3, 2)
        xy = np.einsum('qk,tkd->tqd', bary_points, corners)
        return xy[..., 0], xy[..., 1]


def build_unit_square_mesh(n_subdiv: int) -> StructuredTriMesh:
    """
    构造单位正方形结构化网格

    Args:
        n_subdiv: 每个方向的剖分数 N

    Returns:
        网格对象

    Raises:
        InvalidArgumentError: N < 1
    """
    if isinstance(n_subdiv, bool) or int(n_subdiv) != n_subdiv or n_subdiv < 1:
        raise InvalidArgumentError(f"剖分数必须为正整数: {n_subdiv!r}")
    n = int(n_subdiv)

    idx = np.arange(n + 1)
    jj, ii = np.meshgrid(idx, idx, indexing='ij')
    # 一次除法生成坐标，保证边界节点坐标严格为 0 或 1
    vertices = np.column_stack([ii.ravel() / n, jj.ravel() / n])
    boundary_vertex = (
        (ii.ravel() == 0) | (ii.ravel() == n) | (jj.ravel() == 0) | (jj.ravel() == n)
    )

    cj, ci = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')
    ci = ci.ravel()
    cj = cj.ravel()
    v00 = cj * (n + 1) + ci
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    # 局部边 k 与局部顶点 k 相对
    local_pairs = np.stack([
        triangles[:, [1, 2]],
        triangles[:, [2, 0]],
        triangles[:, [0, 1]],
    ], axis=1)  # (nt, 3, 2)
    all_pairs = np.sort(local_pairs.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(
        all_pairs, axis=0, return_inverse=True, return_counts=True
    )
    triangle_edges = inverse.reshape(-1, 3)
    boundary_edge = counts == 1
    edge_midpoints = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])

    corners = vertices[triangles]
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    areas = 0.5 * det

    # 仿射映射 J = [e1 e2]，∇λ2、∇λ3 为 J^{-1} 的行
    grad_lambda = np.empty((len(triangles), 3, 2))
    grad_lambda[:, 1, 0] = e2[:, 1] / det
    grad_lambda[:, 1, 1] = -e2[:, 0] / det
    grad_lambda[:, 2, 0] = -e1[:, 1] / det
    grad_lambda[:, 2, 1] = e1[:, 0] / det
    grad_lambda[:, 0, :] = -(grad_lambda[:, 1, :] + grad_lambda[:, 2, :])

    for arr in (vertices, triangles, edges, edge_midpoints, triangle_edges,
                boundary_vertex, boundary_edge, areas, grad_lambda, counts):
        arr.setflags(write=False)

    return StructuredTriMesh(
        n_subdiv=n,
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_midpoints=edge_midpoints,
        triangle_edges=triangle_edges,
        boundary_vertex=boundary_vertex,
        boundary_edge=boundary_edge,
        areas=areas,
        grad_lambda=grad_lambda,
        edge_triangle_count=counts,
    )


def locate_points(mesh: StructuredTriMesh, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    批量点定位

    单元编号由 floor(x*N) 截断到 [0, N-1] 得到，再按对角线判断上下三角形，
    恰在对角线上的点归入下三角形。

    Args:
        mesh: 网格
        points: 点坐标 (P, 2)

    Returns:
        (三角形编号 (P,), 重心坐标 (P, 3))

    Raises:
        OutOfDomainError: 存在超出 [0,1]^2 容差的点
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    outside = (pts < -DOMAIN_TOL) | (pts > 1.0 + DOMAIN_TOL) | ~np.isfinite(pts)
    if outside.any():
        bad = int(np.flatnonzero(outside.any(axis=1))[0])
        raise OutOfDomainError(float(pts[bad, 0]), float(pts[bad, 1]))

    n = mesh.n_subdiv
    scaled = pts * n
    cell = np.clip(np.floor(scaled).astype(np.int64), 0, n - 1)
    xi = scaled[:, 0] - cell[:, 0]
    eta = scaled[:, 1] - cell[:, 1]
    is_lower = eta <= xi + DIAGONAL_TOL

    base = 2 * (cell[:, 1] * n + cell[:, 0])
    triangle = np.where(is_lower, base, base + 1)

    lam = np.empty((len(pts), 3))
    # 下三角形 (v00, v10, v11)
    lam[:, 0] = np.where(is_lower, 1.0 - xi, 1.0 - eta)
    lam[:, 1] = np.where(is_lower, xi - eta, xi)
    lam[:, 2] = np.where(is_lower, eta, eta - xi)
    return triangle, lam


def locate_point(mesh: StructuredTriMesh, x: Tuple[float, float]) -> Tuple[int, np.ndarray]:
    """
    单点定位

    Args:
        mesh: 网格
        x: 点坐标 (x, y)

    Returns:
        (三角形编号, 重心坐标 (3,))
    """
    triangle, lam = locate_points(mesh, np.asarray(x, dtype=float).reshape(1, 2))
    return int(triangle[0]), lam[0]


def triangle_affine_data(mesh: StructuredTriMesh, k: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    三角形仿射数据

    Args:
        mesh: 网格
        k: 三角形编号

    Returns:
        (顶点坐标 (3, 2), 重心坐标梯度 (3, 2), 面积)
    """
    if not 0 <= k < mesh.n_triangles:
        raise InvalidArgumentError(f"三角形编号越界: {k}")
    return (
        mesh.vertices[mesh.triangles[k]].copy(),
        mesh.grad_lambda[k].copy(),
        float(mesh.areas[k]),
    )
