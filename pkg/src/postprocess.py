"""
细网格后处理模块

在目标时刻 t，用粗网格状态 (u_H, u̇_H) 在细网格上求解一次线性问题：

  oseen_new:       νK_h ũ + N(u_H) ũ - Bᵀp̃ = (f - u̇_H, φ)
  stokes_standard: νK_h ũ - Bᵀp̃ = (f - u̇_H - (u_H·∇)u_H, φ)

粗网格场在细网格积分点上直接跨网格求值，不做中间插值。
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from .assembly import (
    ConvectionMode,
    OperatorSet,
    assemble_convection,
    assemble_load,
    assemble_operators,
    quadrature_values,
)
from .exceptions import CoercivityError, InvalidArgumentError, SolverError
from .fe_space import FEField, FESpacePair, Family, linear_part
from .galerkin import ForcingFunc, GalerkinState
from .logger import get_logger
from .metrics import timed
from .quadrature import ASSEMBLY_DEGREE
from .saddle_solver import SaddleSystem, solve_saddle


class PostprocessMethod(Enum):
    """后处理方法"""
    OSEEN_NEW = "oseen_new"
    STOKES_STANDARD = "stokes_standard"


@dataclass(eq=False)
class PostprocessRequest:
    """后处理请求"""
    state: GalerkinState
    fine_space: FESpacePair
    nu: float
    forcing: Optional[ForcingFunc] = None
    method: PostprocessMethod = PostprocessMethod.OSEEN_NEW
    # None 表示按粗网格元类型决定（mini 为 True）
    use_linear_part: Optional[bool] = None
    # 后处理对流项默认采用普通形式
    skew: bool = False
    fine_ops: Optional[OperatorSet] = None
    degree: int = ASSEMBLY_DEGREE

    def __post_init__(self):
        self.method = PostprocessMethod(self.method)
        if self.state.udot is None:
            raise InvalidArgumentError("后处理需要粗网格状态中的时间导数 udot")
        if not self.nu > 0:
            raise InvalidArgumentError(f"粘性系数必须为正: {self.nu}")
        coarse_mini = self.state.space.family is Family.MINI
        if self.use_linear_part is None:
            self.use_linear_part = coarse_mini
        elif self.use_linear_part and not coarse_mini:
            raise InvalidArgumentError("线性部分只对 mini 粗网格状态有定义")
        if self.fine_ops is not None and self.fine_ops.space is not self.fine_space:
            raise InvalidArgumentError("fine_ops 与细网格空间不一致")

        h = self.fine_space.mesh.h
        H = self.state.space.mesh.h
        if h >= H:
            get_logger().warning(f"细网格尺寸 h={h:.4g} 不小于粗网格尺寸 H={H:.4g}")

    @property
    def t(self) -> float:
        return self.state.t

    def wind(self) -> FEField:
        """粗网格速度（mini 时取线性部分）"""
        u = self.state.u
        return linear_part(u) if self.use_linear_part else u

    def datum(self) -> FEField:
        """粗网格时间导数（mini 时取线性部分）"""
        udot = self.state.udot
        return linear_part(udot) if self.use_linear_part else udot

    def operators(self) -> OperatorSet:
        if self.fine_ops is None:
            self.fine_ops = assemble_operators(self.fine_space, self.degree)
        return self.fine_ops


class PostprocessResult(NamedTuple):
    """后处理结果"""
    velocity: FEField
    pressure: FEField


def _forcing_values(request: PostprocessRequest) -> np.ndarray:
    """f(t) 在细网格积分点上的值 (nt, nq, 2)"""
    tables = request.fine_space.tables(request.degree)
    if request.forcing is None:
        return np.zeros(tables.x.shape + (2,))
    values = np.asarray(request.forcing(tables.x, tables.y, request.t), dtype=float)
    if values.ndim == 1:
        values = values.reshape(2, 1, 1)
    return np.moveaxis(np.broadcast_to(values, (2,) + tables.x.shape), 0, -1)


def _solve(request: PostprocessRequest, A, load: np.ndarray, on_singular=SolverError) -> PostprocessResult:
    ops = request.operators()
    system = SaddleSystem(request.fine_space, A, ops.B, ops.m_p, load)
    try:
        velocity, pressure, _ = solve_saddle(system)
    except SolverError as e:
        if on_singular is SolverError:
            raise
        raise on_singular(
            f"Oseen 后处理系统奇异（ν={request.nu:g}, H={request.state.space.mesh.h:.4g}）",
            size=e.size, detail=e.detail
        ) from e
    div = float(np.linalg.norm(ops.B @ velocity.coeffs, np.inf))
    get_logger().debug(
        f"后处理完成: {request.method.value}, {request.fine_space.describe()}, ‖Bũ‖∞={div:.3e}"
    )
    return PostprocessResult(velocity, pressure)


@timed("fine_postprocess")
def postprocess_oseen(request: PostprocessRequest) -> PostprocessResult:
    """
    新后处理：细网格上的线性 Oseen 问题

    A = νK_h + N(w)，右端 (f(t) - ẇ, φ_h)，w 为粗网格速度（风场），ẇ 为其时间导数。

    Args:
        request: 后处理请求

    Returns:
        细网格上的 (ũ, p̃)，p̃ 零均值

    Raises:
        CoercivityError: 系统奇异（相对 ν，H 过大）
    """
    ops = request.operators()
    mode = ConvectionMode.SKEW if request.skew else ConvectionMode.PLAIN
    N = assemble_convection(request.fine_space, request.wind(), mode, request.degree)
    A = (request.nu * ops.K + N).tocsr()

    datum, _ = quadrature_values(request.fine_space, request.datum(), request.degree)
    load = assemble_load(request.fine_space, _forcing_values(request) - datum, request.degree)
    return _solve(request, A, load, on_singular=CoercivityError)


@timed("fine_postprocess")
def postprocess_stokes(request: PostprocessRequest) -> PostprocessResult:
    """
    标准后处理：细网格上的 Stokes 问题，对流项作为已知数据放到右端

    A = νK_h，右端 (f(t) - ẇ - (w·∇)w, φ_h)。

    Args:
        request: 后处理请求

    Returns:
        细网格上的 (ũ, p̃)
    """
    ops = request.operators()
    A = (request.nu * ops.K).tocsr()

    w, grad_w = quadrature_values(request.fine_space, request.wind(), request.degree,
                                  want_gradient=True)
    datum, _ = quadrature_values(request.fine_space, request.datum(), request.degree)
    # ((w·∇)w)_α = Σ_β w_β ∂_β w_α
    transport = np.einsum('tqb,tqab->tqa', w, grad_w)
    load = assemble_load(request.fine_space,
                         _forcing_values(request) - datum - transport, request.degree)
    return _solve(request, A, load)


def postprocess(request: PostprocessRequest) -> PostprocessResult:
    """按请求中的方法分派"""
    if request.method is PostprocessMethod.OSEEN_NEW:
        return postprocess_oseen(request)
    return postprocess_stokes(request)
