"""
组装模块

质量、刚度、散度、对流（斜对称与普通形式）矩阵及载荷向量。
单元循环以 numpy 批量运算完成，COO 格式收集后转换为 CSR（重复项求和）。
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .exceptions import InvalidArgumentError, NumericalError
from .fe_space import FEField, FESpacePair, field_at_quadrature
from .quadrature import ASSEMBLY_DEGREE

# 风场或被积函数：离散函数、解析函数 f(x, y) -> (2, ...)，或积分点上的值 (nt, nq, 2)
VectorData = Union[FEField, Callable[[np.ndarray, np.ndarray], np.ndarray], np.ndarray]


class ConvectionMode(Enum):
    """对流项形式"""
    SKEW = "skew"
    PLAIN = "plain"


@dataclass(eq=False)
class OperatorSet:
    """与时间无关的离散算子"""
    space: FESpacePair
    M: sp.csr_matrix      # 速度质量 (n_u, n_u)
    K: sp.csr_matrix      # 速度刚度（不含 ν）(n_u, n_u)
    B: sp.csr_matrix      # 散度 (n_p, n_u)，元素 (ψ, ∇·φ)
    m_p: np.ndarray       # 压力均值向量 (n_p,)，元素 ∫ψ
    degree: int


def _scatter(local: np.ndarray, row_dofs: np.ndarray, col_dofs: np.ndarray, shape) -> sp.csr_matrix:
    """单元矩阵 (nt, nr, nc) 按自由度表累加为全局稀疏矩阵"""
    rows = np.broadcast_to(row_dofs[:, :, None], local.shape)
    cols = np.broadcast_to(col_dofs[:, None, :], local.shape)
    return sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()


def _restrict(space: FESpacePair, full: sp.csr_matrix) -> sp.csr_matrix:
    """限制到自由（内部）标量自由度"""
    free = space.free_scalar
    return full[free][:, free].tocsr()


def _scalar_square(space: FESpacePair, local: np.ndarray, free_only: bool = True) -> sp.csr_matrix:
    n = space.n_scalar_full
    full = _scatter(local, space.cell_dofs, space.cell_dofs, (n, n))
    return _restrict(space, full) if free_only else full


def _vector_block(scalar: sp.csr_matrix) -> sp.csr_matrix:
    return sp.block_diag([scalar, scalar], format='csr')


def assemble_scalar_mass(space: FESpacePair, degree: int = ASSEMBLY_DEGREE,
                         free_only: bool = True) -> sp.csr_matrix:
    """
    标量速度基的质量矩阵

    Args:
        space: 空间
        degree: 积分阶数
        free_only: False 时返回包含边界自由度的完整矩阵（测试用）
    """
    t = space.tables(degree)
    local = np.einsum('tq,qi,qj->tij', t.weights, t.phi, t.phi)
    return _scalar_square(space, local, free_only)


def assemble_scalar_stiffness(space: FESpacePair, degree: int = ASSEMBLY_DEGREE,
                              free_only: bool = True) -> sp.csr_matrix:
    """标量速度基的刚度矩阵 (∇φ_j, ∇φ_i)"""
    t = space.tables(degree)
    local = np.einsum('tq,tqid,tqjd->tij', t.weights, t.grad_phi, t.grad_phi)
    return _scalar_square(space, local, free_only)


def assemble_divergence(space: FESpacePair, degree: int = ASSEMBLY_DEGREE) -> sp.csr_matrix:
    """散度矩阵 B_{k,j} = (ψ_k, ∇·φ_j)，形状 (n_p, n_u)"""
    t = space.tables(degree)
    mesh = space.mesh
    shape = (space.n_p, space.n_scalar_full)
    blocks = []
    for c in range(2):
        local = np.einsum('tq,qk,tqj->tkj', t.weights, t.psi, t.grad_phi[..., c])
        full = _scatter(local, mesh.triangles, space.cell_dofs, shape)
        blocks.append(full[:, space.free_scalar])
    return sp.hstack(blocks, format='csr')


def pressure_mean_vector(space: FESpacePair) -> np.ndarray:
    """压力均值向量：∫ψ_k = 相邻三角形面积之和 / 3"""
    mesh = space.mesh
    weights = np.repeat(mesh.areas / 3.0, 3)
    return np.bincount(mesh.triangles.ravel(), weights=weights, minlength=space.n_p)


def assemble_operators(space: FESpacePair, degree: int = ASSEMBLY_DEGREE) -> OperatorSet:
    """
    组装质量、刚度、散度算子与压力均值向量

    Args:
        space: 空间
        degree: 积分阶数

    Returns:
        算子集合
    """
    return OperatorSet(
        space=space,
        M=_vector_block(assemble_scalar_mass(space, degree)),
        K=_vector_block(assemble_scalar_stiffness(space, degree)),
        B=assemble_divergence(space, degree),
        m_p=pressure_mean_vector(space),
        degree=degree,
    )


def pressure_gradient_coupling(ops: OperatorSet) -> sp.csr_matrix:
    """
    压力梯度项 (∇p, φ) = -(p, ∇·φ)，即 -Bᵀ 作用于压力系数

    对零迹的 φ 精确成立。
    """
    return (-ops.B.T).tocsr()


def _vector_values(space: FESpacePair, data: VectorData, degree: int,
                   want_gradient: bool = False):
    """向量数据在本空间积分点上的值 (nt, nq, 2) 与梯度 (nt, nq, 2, 2)"""
    t = space.tables(degree)
    nt, nq = t.x.shape
    if isinstance(data, FEField):
        if not data.is_velocity:
            raise InvalidArgumentError("风场必须是速度场")
        return field_at_quadrature(data, space, degree, want_gradient)
    if callable(data):
        if want_gradient:
            raise InvalidArgumentError("解析风场不提供梯度")
        values = np.asarray(data(t.x, t.y), dtype=float)
        if values.ndim == 1:
            values = values.reshape(2, 1, 1)
        values = np.moveaxis(np.broadcast_to(values, (2, nt, nq)), 0, -1)
    else:
        values = np.asarray(data, dtype=float)
        if values.shape != (nt, nq, 2):
            raise InvalidArgumentError(f"积分点数据形状应为 {(nt, nq, 2)}，实际 {values.shape}")
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values).all(axis=(1, 2)))[0])
        raise NumericalError("积分点数据出现非有限值", triangle=bad)
    return values, None


def assemble_convection(
    space: FESpacePair,
    wind: VectorData,
    mode: ConvectionMode = ConvectionMode.SKEW,
    degree: int = ASSEMBLY_DEGREE
) -> sp.csr_matrix:
    """
    对流矩阵

    PLAIN: ((w·∇)φ_j, φ_i)
    SKEW:  ½[((w·∇)φ_j, φ_i) - ((w·∇)φ_i, φ_j)]，结构上反对称，vᵀNv 在舍入误差内为零

    Args:
        space: 空间
        wind: 风场（可位于其他网格）
        mode: 对流形式
        degree: 积分阶数

    Returns:
        (n_u, n_u) 稀疏矩阵
    """
    mode = ConvectionMode(mode)
    t = space.tables(degree)
    w, _ = _vector_values(space, wind, degree)
    transport = np.einsum('tqd,tqjd->tqj', w, t.grad_phi)
    local = np.einsum('tq,qi,tqj->tij', t.weights, t.phi, transport)
    scalar = _scalar_square(space, local)
    if mode is ConvectionMode.SKEW:
        scalar = (0.5 * (scalar - scalar.T)).tocsr()
    return _vector_block(scalar)


def assemble_skew_wind_derivative(
    space: FESpacePair,
    u: FEField,
    degree: int = ASSEMBLY_DEGREE
) -> sp.csr_matrix:
    """
    斜对称对流项对风场的导数：δ ↦ N_skew(δ) u

    Newton 线性化中与 N_skew(u) 相加得到完整 Jacobian。

    Args:
        space: 空间（u 必须属于该空间所在网格）
        u: 当前速度
        degree: 积分阶数

    Returns:
        (n_u, n_u) 稀疏矩阵
    """
    t = space.tables(degree)
    values, grads = field_at_quadrature(u, space, degree, want_gradient=True)
    # T1[α,β]: φ_a φ_b ∂_β u_α；T2[α,β]: φ_b u_α ∂_β φ_a
    t1 = np.einsum('tq,qa,qb,tqxy->xytab', t.weights, t.phi, t.phi, grads)
    t2 = np.einsum('tq,qb,tqx,tqay->xytab', t.weights, t.phi, values, t.grad_phi)
    local = 0.5 * (t1 - t2)
    blocks = [[_scalar_square(space, local[a, b]) for b in range(2)] for a in range(2)]
    return sp.bmat(blocks, format='csr')


def assemble_load(
    space: FESpacePair,
    g: VectorData,
    degree: int = ASSEMBLY_DEGREE
) -> np.ndarray:
    """
    载荷向量 (g, φ_i)

    Args:
        space: 空间
        g: 解析函数、离散函数（可跨网格）或积分点上的值
        degree: 积分阶数

    Returns:
        (n_u,) 向量
    """
    t = space.tables(degree)
    values, _ = _vector_values(space, g, degree)
    parts = []
    for c in range(2):
        local = np.einsum('tq,qi,tq->ti', t.weights, t.phi, values[..., c])
        full = np.bincount(space.cell_dofs.ravel(), weights=local.ravel(),
                           minlength=space.n_scalar_full)
        parts.append(full[space.free_scalar])
    return np.concatenate(parts)


def quadrature_values(space: FESpacePair, g: VectorData, degree: int = ASSEMBLY_DEGREE,
                      want_gradient: bool = False):
    """向量数据在本空间积分点上的值（供后处理组合被积函数）"""
    return _vector_values(space, g, degree, want_gradient)
