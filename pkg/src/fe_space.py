"""
有限元空间模块

速度-压力混合空间的自由度管理、插值、跨网格求值、线性部分提取与压力归一化。

标量速度自由度的“全局”编号：先顶点，再泡函数（mini，每个三角形一个）
或边（Taylor-Hood）。边界自由度不进入未知量（齐次 Dirichlet 条件），
速度向量按 [第一分量自由度, 第二分量自由度] 排列。
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .exceptions import InvalidArgumentError, NumericalError
from .fe_basis import eval_mini, eval_p1, eval_p2, physical_gradients
from .logger import get_logger
from .mesh import StructuredTriMesh, locate_points
from .quadrature import QuadRule, rule_for_degree


class Family(Enum):
    """混合元类型"""
    MINI = "mini"
    TAYLOR_HOOD = "taylor-hood"


class FieldRole(Enum):
    """离散函数角色"""
    VELOCITY = "velocity"
    PRESSURE = "pressure"


@dataclass(frozen=True, eq=False)
class QuadratureTables:
    """某个积分规则下预计算的单元数据"""
    rule: QuadRule
    x: np.ndarray            # (nt, nq)
    y: np.ndarray            # (nt, nq)
    weights: np.ndarray      # (nt, nq)，面积 × 权重
    phi: np.ndarray          # (nq, nloc) 速度标量基
    grad_phi: np.ndarray     # (nt, nq, nloc, 2)
    psi: np.ndarray          # (nq, 3) 压力 P1 基


class FESpacePair:
    """速度-压力混合有限元空间"""

    def __init__(self, mesh: StructuredTriMesh, family: Family):
        """
        初始化空间

        Args:
            mesh: 网格
            family: 混合元类型
        """
        self.mesh = mesh
        self.family = Family(family)
        nv, nt = mesh.n_vertices, mesh.n_triangles

        if self.family is Family.MINI:
            extra = nt
            self.cell_dofs = np.column_stack([mesh.triangles, nv + np.arange(nt)])
            extra_free = np.ones(nt, dtype=bool)
        else:
            extra = mesh.n_edges
            self.cell_dofs = np.column_stack([mesh.triangles, nv + mesh.triangle_edges])
            extra_free = ~mesh.boundary_edge

        self.n_scalar_full = nv + extra
        free_mask = np.concatenate([~mesh.boundary_vertex, extra_free])
        self.free_scalar = np.flatnonzero(free_mask)
        self.constrained_scalar = np.flatnonzero(~free_mask)
        self.full_to_free = np.full(self.n_scalar_full, -1, dtype=np.int64)
        self.full_to_free[self.free_scalar] = np.arange(len(self.free_scalar))
        self.n_free_scalar = len(self.free_scalar)
        # 线性部分提取时需要清零的自由度（仅 mini 的泡函数）
        self.bubble_free_mask = self.free_scalar >= nv if self.family is Family.MINI \
            else np.zeros(self.n_free_scalar, dtype=bool)

        self.n_u = 2 * self.n_free_scalar
        self.n_p = nv
        self._tables: Dict[int, QuadratureTables] = {}

    @property
    def n_local(self) -> int:
        """每个单元的标量速度基函数个数"""
        return self.cell_dofs.shape[1]

    def scalar_basis(self, lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """速度标量基在重心坐标处的值与重心偏导"""
        if self.family is Family.MINI:
            return eval_mini(lam)
        return eval_p2(lam)

    def nodal_points(self) -> np.ndarray:
        """
        标量速度全局自由度的节点坐标

        泡函数自由度取三角形重心（插值时系数置零，不使用该值）。
        """
        mesh = self.mesh
        if self.family is Family.MINI:
            centers = mesh.vertices[mesh.triangles].mean(axis=1)
            return np.vstack([mesh.vertices, centers])
        return np.vstack([mesh.vertices, mesh.edge_midpoints])

    def tables(self, degree: int) -> QuadratureTables:
        """
        获取（并缓存）指定精确阶数的单元积分数据

        Args:
            degree: 积分精确阶数

        Returns:
            预计算数据
        """
        cached = self._tables.get(degree)
        if cached is not None:
            return cached

        rule = rule_for_degree(degree)
        mesh = self.mesh
        x, y = mesh.quadrature_points(rule.points)
        phi, dphi = self.scalar_basis(rule.points)
        grad_phi = np.einsum('qlk,tkd->tqld', dphi, mesh.grad_lambda)
        psi, _ = eval_p1(rule.points)
        tables = QuadratureTables(
            rule=rule,
            x=x,
            y=y,
            weights=mesh.areas[:, None] * rule.weights[None, :],
            phi=phi,
            grad_phi=grad_phi,
            psi=psi,
        )
        self._tables[degree] = tables
        return tables

    def describe(self) -> str:
        return (f"{self.family.value} N={self.mesh.n_subdiv} "
                f"(n_u={self.n_u}, n_p={self.n_p})")


def build_space(mesh: StructuredTriMesh, family: Family) -> FESpacePair:
    """
    构造混合有限元空间

    Args:
        mesh: 网格
        family: 混合元类型

    Returns:
        空间对象
    """
    space = FESpacePair(mesh, family)
    get_logger().debug(f"构造有限元空间: {space.describe()}")
    return space


@dataclass(eq=False)
class FEField:
    """离散函数：空间 + 角色 + 系数向量"""
    space: FESpacePair
    role: FieldRole
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        expected = self.space.n_u if self.role is FieldRole.VELOCITY else self.space.n_p
        if self.coeffs.shape != (expected,):
            raise InvalidArgumentError(
                f"{self.role.value} 系数长度应为 {expected}，实际 {self.coeffs.shape}"
            )

    @classmethod
    def zeros(cls, space: FESpacePair, role: FieldRole) -> 'FEField':
        """零函数"""
        n = space.n_u if role is FieldRole.VELOCITY else space.n_p
        return cls(space, role, np.zeros(n))

    @property
    def is_velocity(self) -> bool:
        return self.role is FieldRole.VELOCITY

    def full_components(self) -> np.ndarray:
        """
        展开到全局标量编号（边界自由度补零）

        Returns:
            速度 (2, n_scalar_full)；压力 (1, n_p)
        """
        if not self.is_velocity:
            return self.coeffs[None, :]
        space = self.space
        full = np.zeros((2, space.n_scalar_full))
        n = space.n_free_scalar
        full[0, space.free_scalar] = self.coeffs[:n]
        full[1, space.free_scalar] = self.coeffs[n:]
        return full

    def copy_with(self, coeffs: np.ndarray) -> 'FEField':
        return FEField(self.space, self.role, coeffs)


def interpolate(
    space: FESpacePair,
    role: FieldRole,
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> FEField:
    """
    节点插值

    速度取顶点（及 Taylor-Hood 边中点）的值，泡函数系数置零，边界值丢弃。

    Args:
        space: 空间
        role: 速度或压力
        func: f(x, y)，速度返回形状 (2, P)，压力返回 (P,)

    Returns:
        离散函数

    Raises:
        NumericalError: 节点值非有限
    """
    role = FieldRole(role)
    if role is FieldRole.PRESSURE:
        pts = space.mesh.vertices
        values = np.broadcast_to(
            np.asarray(func(pts[:, 0], pts[:, 1]), dtype=float), (len(pts),)
        )
        if not np.all(np.isfinite(values)):
            raise NumericalError("压力插值出现非有限节点值")
        return FEField(space, role, values.copy())

    nodes = space.nodal_points()[space.free_scalar]
    values = np.asarray(func(nodes[:, 0], nodes[:, 1]), dtype=float)
    if values.ndim == 1:
        # 常向量
        values = values.reshape(2, 1)
    values = np.broadcast_to(values, (2, len(nodes))).copy()
    if space.family is Family.MINI:
        values[:, space.bubble_free_mask] = 0.0
    if not np.all(np.isfinite(values)):
        raise NumericalError("速度插值出现非有限节点值")
    return FEField(space, role, values.ravel())


def _evaluate_located(
    fld: FEField,
    triangle: np.ndarray,
    lam: np.ndarray,
    want_gradient: bool
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """已定位点上的求值，速度返回 (P, 2) / (P, 2, 2)，压力返回 (P,) / (P, 2)"""
    space = fld.space
    mesh = space.mesh
    full = fld.full_components()
    if fld.is_velocity:
        phi, dphi = space.scalar_basis(lam)
        local = full[:, space.cell_dofs[triangle]]      # (2, P, nloc)
    else:
        phi, dphi = eval_p1(lam)
        local = full[:, mesh.triangles[triangle]]       # (1, P, 3)

    values = np.einsum('pl,cpl->pc', phi, local)
    grads = None
    if want_gradient:
        gphys = physical_gradients(dphi, mesh.grad_lambda[triangle])
        grads = np.einsum('pld,cpl->pcd', gphys, local)

    if not fld.is_velocity:
        values = values[:, 0]
        grads = grads[:, 0, :] if grads is not None else None
    return values, grads


def evaluate_points(
    fld: FEField,
    points: np.ndarray,
    want_gradient: bool = False
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    批量求值（可跨网格）

    Args:
        fld: 离散函数
        points: 点坐标 (P, 2)
        want_gradient: 是否同时返回梯度

    Returns:
        (值, 梯度或 None)；速度梯度 G[p, α, β] = ∂_β u_α
    """
    triangle, lam = locate_points(fld.space.mesh, points)
    return _evaluate_located(fld, triangle, lam, want_gradient)


def eval_field(fld: FEField, point, want_gradient: bool = False):
    """
    单点求值

    Args:
        fld: 离散函数
        point: (x, y)
        want_gradient: 是否返回梯度

    Returns:
        速度 (2,) 或压力标量；want_gradient 时返回 (值, 梯度)
    """
    values, grads = evaluate_points(fld, np.asarray(point, dtype=float).reshape(1, 2),
                                    want_gradient)
    value = values[0] if fld.is_velocity else float(values[0])
    if want_gradient:
        return value, grads[0]
    return value


def field_at_quadrature(
    fld: FEField,
    target: FESpacePair,
    degree: int,
    want_gradient: bool = True
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    在目标空间网格的积分点上求值

    同一网格时直接使用单元基函数表，否则逐点定位（跨网格）。

    Args:
        fld: 离散函数（速度）
        target: 积分点所在空间
        degree: 积分精确阶数
        want_gradient: 是否返回梯度

    Returns:
        (值 (nt, nq, 2), 梯度 (nt, nq, 2, 2) 或 None)
    """
    tables = target.tables(degree)
    nt, nq = tables.x.shape
    if fld.space.mesh.n_subdiv == target.mesh.n_subdiv and fld.is_velocity:
        own = fld.space.tables(degree)
        local = fld.full_components()[:, fld.space.cell_dofs]   # (2, nt, nloc)
        values = np.einsum('ql,ctl->tqc', own.phi, local)
        grads = np.einsum('tqld,ctl->tqcd', own.grad_phi, local) if want_gradient else None
        return values, grads

    points = np.column_stack([tables.x.ravel(), tables.y.ravel()])
    values, grads = evaluate_points(fld, points, want_gradient)
    values = values.reshape(nt, nq, *values.shape[1:])
    if grads is not None:
        grads = grads.reshape(nt, nq, *grads.shape[1:])
    return values, grads


def linear_part(fld: FEField) -> FEField:
    """
    mini 速度场的线性部分（泡函数系数清零）

    Raises:
        InvalidArgumentError: 压力场或 Taylor-Hood 场
    """
    if not fld.is_velocity or fld.space.family is not Family.MINI:
        raise InvalidArgumentError("linear_part 仅适用于 mini 元速度场")
    coeffs = fld.coeffs.copy()
    mask = np.tile(fld.space.bubble_free_mask, 2)
    coeffs[mask] = 0.0
    return fld.copy_with(coeffs)


def pressure_mean(fld: FEField) -> float:
    """P1 压力的精确均值 Σ 面积·(p1+p2+p3)/3 / |Ω|"""
    mesh = fld.space.mesh
    tri_means = fld.coeffs[mesh.triangles].mean(axis=1)
    return float(np.dot(mesh.areas, tri_means) / mesh.areas.sum())


def normalize_pressure(fld: FEField) -> FEField:
    """
    压力归一化为零均值（商空间代表元）

    Raises:
        InvalidArgumentError: 非压力场
    """
    if fld.role is not FieldRole.PRESSURE:
        raise InvalidArgumentError("normalize_pressure 仅适用于压力场")
    return fld.copy_with(fld.coeffs - pressure_mean(fld))
