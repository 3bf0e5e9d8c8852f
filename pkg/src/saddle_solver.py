"""
鞍点系统求解模块

求解 Stokes、Oseen 以及带约束质量系统。压力零均值由一个标量 Lagrange 乘子实现：

    [  A   -Bᵀ   0  ] [u]   [ f ]
    [ -B    0   m_p ] [p] = [-g ]
    [  0  m_pᵀ   0  ] [μ]   [ 0 ]

即 A u - Bᵀp = f（-Bᵀp 为压力梯度项），B u - μ m_p = g，∫p = 0。
采用稀疏 LU（SuperLU，列置换 + 部分主元）直接分解，奇异时报错而不做正则化。
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import OperatorSet, assemble_operators
from .exceptions import InvalidArgumentError, SolverError
from .fe_space import FEField, FESpacePair, FieldRole
from .logger import get_logger

RESIDUAL_TOL = 1e-10
REFINEMENT_STEPS = 2


@dataclass(eq=False)
class SaddleSystem:
    """鞍点系统数据"""
    space: FESpacePair
    A: sp.spmatrix
    B: sp.spmatrix
    m_p: np.ndarray
    f: np.ndarray
    g: Optional[np.ndarray] = None

    def __post_init__(self):
        n_u, n_p = self.space.n_u, self.space.n_p
        if self.A.shape != (n_u, n_u) or self.B.shape != (n_p, n_u):
            raise InvalidArgumentError(
                f"系统维数不一致: A{self.A.shape}, B{self.B.shape}, 期望 n_u={n_u}, n_p={n_p}"
            )
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != (n_u,) or np.shape(self.m_p) != (n_p,):
            raise InvalidArgumentError("载荷或均值向量长度不一致")
        if self.g is None:
            self.g = np.zeros(n_p)

    @property
    def size(self) -> int:
        return self.space.n_u + self.space.n_p + 1

    def augmented_matrix(self) -> sp.csc_matrix:
        """增广矩阵（方阵，规模 n_u + n_p + 1）"""
        m = sp.csr_matrix(np.asarray(self.m_p, dtype=float).reshape(-1, 1))
        return sp.bmat([
            [self.A, -self.B.T, None],
            [-self.B, None, m],
            [None, m.T, None],
        ], format='csc')

    def rhs(self, f: Optional[np.ndarray] = None, g: Optional[np.ndarray] = None) -> np.ndarray:
        f = self.f if f is None else f
        g = self.g if g is None else g
        return np.concatenate([f, -np.asarray(g, dtype=float), [0.0]])


class SaddleSolution(NamedTuple):
    """求解结果"""
    velocity: FEField
    pressure: FEField
    multiplier: float


class SaddleFactorization:
    """增广矩阵的 LU 分解，可对多个右端项复用"""

    def __init__(self, system: SaddleSystem, residual_tol: float = RESIDUAL_TOL):
        """
        分解鞍点系统

        Args:
            system: 鞍点系统
            residual_tol: 相对残差容差

        Raises:
            SolverError: 矩阵结构或数值奇异
        """
        self.system = system
        self.residual_tol = residual_tol
        self.logger = get_logger()
        self.matrix = system.augmented_matrix()
        try:
            self._lu = splu(self.matrix)
        except RuntimeError as e:
            raise SolverError("鞍点系统 LU 分解失败", size=system.size, detail=str(e)) from e

        diag_u = np.abs(self._lu.U.diagonal())
        self.min_pivot = float(diag_u.min()) if diag_u.size else 0.0
        self.max_pivot = float(diag_u.max()) if diag_u.size else 0.0
        if not np.isfinite(self.min_pivot) or self.min_pivot == 0.0:
            raise SolverError(
                "鞍点系统数值奇异", size=system.size,
                detail=f"最小主元 {self.min_pivot:.3e}, 最大主元 {self.max_pivot:.3e}"
            )

    def solve_vector(self, rhs: np.ndarray) -> np.ndarray:
        """
        求解增广系统，必要时做迭代改进

        Args:
            rhs: 增广右端项

        Returns:
            增广解向量

        Raises:
            SolverError: 解非有限或残差不满足容差
        """
        x = self._lu.solve(rhs)
        bound = self.residual_tol * (1.0 + np.linalg.norm(rhs, np.inf))
        residual = rhs - self.matrix @ x
        for _ in range(REFINEMENT_STEPS):
            if np.linalg.norm(residual, np.inf) <= bound:
                break
            x = x + self._lu.solve(residual)
            residual = rhs - self.matrix @ x

        res_norm = float(np.linalg.norm(residual, np.inf))
        if not np.all(np.isfinite(x)):
            raise SolverError("鞍点系统解出现非有限值", size=len(rhs),
                              detail=f"最小主元 {self.min_pivot:.3e}")
        if res_norm > bound:
            raise SolverError(
                "鞍点系统残差超出容差", size=len(rhs),
                detail=f"残差 {res_norm:.3e} > {bound:.3e}, 最小主元 {self.min_pivot:.3e}"
            )
        return x

    def solve(self, f: Optional[np.ndarray] = None, g: Optional[np.ndarray] = None) -> SaddleSolution:
        """对给定载荷求解，返回速度、压力与乘子"""
        space = self.system.space
        x = self.solve_vector(self.system.rhs(f, g))
        n_u, n_p = space.n_u, space.n_p
        u = FEField(space, FieldRole.VELOCITY, x[:n_u])
        p = FEField(space, FieldRole.PRESSURE, x[n_u:n_u + n_p])
        div = float(np.linalg.norm(self.system.B @ u.coeffs, np.inf))
        g_norm = float(np.linalg.norm(self.system.g, np.inf))
        if g_norm == 0.0 and div > RESIDUAL_TOL * (1.0 + np.linalg.norm(u.coeffs, np.inf)):
            self.logger.warning(f"离散散度残差偏大: ‖Bu‖∞ = {div:.3e}")
        return SaddleSolution(u, p, float(x[-1]))


def solve_saddle(system: SaddleSystem, residual_tol: float = RESIDUAL_TOL) -> SaddleSolution:
    """
    求解鞍点系统

    Args:
        system: 鞍点系统
        residual_tol: 相对残差容差

    Returns:
        (速度, 零均值压力, 乘子)

    Raises:
        SolverError: 分解失败（奇异），对应强制性丧失
    """
    return SaddleFactorization(system, residual_tol).solve()


class LerayProjector:
    """离散 Leray 投影：M-范数下到离散无散空间的正交投影"""

    def __init__(self, ops: OperatorSet):
        self.ops = ops
        space = ops.space
        system = SaddleSystem(space, ops.M, ops.B, ops.m_p, np.zeros(space.n_u))
        self.factorization = SaddleFactorization(system)

    def project_coeffs(self, w: np.ndarray) -> np.ndarray:
        return self.factorization.solve(self.ops.M @ w).velocity.coeffs

    def project(self, velocity: FEField) -> FEField:
        if not velocity.is_velocity or velocity.space is not self.ops.space:
            raise InvalidArgumentError("Leray 投影需要本空间的速度场")
        return velocity.copy_with(self.project_coeffs(velocity.coeffs))


def leray_project(space: FESpacePair, velocity: FEField,
                  ops: Optional[OperatorSet] = None) -> FEField:
    """
    离散 Leray 投影

    求解 M w - Bᵀq = M v, B w = 0，w 在离散无散场中 M-范数距离 v 最近。

    Args:
        space: 空间
        velocity: 输入速度场
        ops: 已组装的算子（可选）

    Returns:
        离散无散速度场
    """
    if ops is None:
        ops = assemble_operators(space)
    return LerayProjector(ops).project(velocity)


@dataclass
class CoercivityWitness:
    """离散无散子空间上 sym(A) 的强制性见证"""
    min_ratio: float
    samples: int
    threshold: float = 0.5
    ratios: list = field(default_factory=list, repr=False)

    @property
    def holds(self) -> bool:
        return self.min_ratio >= self.threshold


def coercivity_witness(
    ops: OperatorSet,
    A: sp.spmatrix,
    nu: float,
    samples: int = 20,
    seed: int = 0,
    projector: Optional[LerayProjector] = None
) -> CoercivityWitness:
    """
    强制性见证：对随机离散无散向量检查 vᵀ sym(A) v ≥ 0.5 ν vᵀKv

    Args:
        ops: 算子集合
        A: 速度块（如 νK + N_plain(u_H)）
        nu: 粘性系数
        samples: 样本数
        seed: 随机种子
        projector: 可复用的 Leray 投影

    Returns:
        见证结果（最小比值 vᵀAv / (ν vᵀKv)）
    """
    projector = projector or LerayProjector(ops)
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(samples):
        v = projector.project_coeffs(rng.standard_normal(ops.space.n_u))
        energy = nu * float(v @ (ops.K @ v))
        if energy <= 0.0:
            continue
        # vᵀAv = vᵀ sym(A) v
        ratios.append(float(v @ (A @ v)) / energy)
    min_ratio = min(ratios) if ratios else float('nan')
    return CoercivityWitness(min_ratio=min_ratio, samples=len(ratios), ratios=ratios)
