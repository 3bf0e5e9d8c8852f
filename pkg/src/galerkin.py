"""
粗网格 Galerkin 时间演化模块

半离散混合有限元方程

    M u̇ + νK u + N_skew(u) u - Bᵀp = F(t),   B u = 0

用梯形法则（Crank-Nicolson）推进，每步以 Newton 迭代求解非线性鞍点系统；
每步只有一个压力未知量，约定赋给 pⁿ⁺¹。
终止时刻的时间导数 u̇ 由半离散方程本身恢复（约束质量系统），不做时间差分。
"""

from dataclasses import dataclass, replace
from typing import Callable, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .assembly import (
    ConvectionMode,
    OperatorSet,
    assemble_convection,
    assemble_load,
    assemble_operators,
    assemble_skew_wind_derivative,
    pressure_gradient_coupling,
)
from .exceptions import InvalidArgumentError, NewtonConvergenceError
from .fe_space import (
    FEField,
    FESpacePair,
    FieldRole,
    interpolate,
    normalize_pressure,
)
from .logger import get_logger
from .quadrature import ASSEMBLY_DEGREE
from .saddle_solver import LerayProjector, SaddleFactorization, SaddleSystem

# f(x, y, t) -> (2, ...)
ForcingFunc = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
# u0(x, y) -> (2, ...)
VelocityFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]

DIVERGENCE_TOL = 1e-9
STEP_COUNT_TOL = 1e-12


@dataclass(frozen=True)
class EvolutionConfig:
    """时间演化参数"""
    nu: float
    dt: float
    t_final: float
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    forcing: Optional[ForcingFunc] = None
    # False 时关闭对流项（Stokes 模式，线性问题）
    convection: bool = True
    assembly_degree: int = ASSEMBLY_DEGREE

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidArgumentError(f"粘性系数必须为正: {self.nu}")
        if not self.dt > 0 or not self.t_final > 0:
            raise InvalidArgumentError(f"时间步长和终止时刻必须为正: dt={self.dt}, T={self.t_final}")
        if self.newton_max_iter < 1 or not self.newton_tol > 0:
            raise InvalidArgumentError("Newton 参数不合法")
        steps = round(self.t_final / self.dt)
        if steps < 1 or abs(steps * self.dt - self.t_final) > STEP_COUNT_TOL * max(1.0, self.t_final):
            raise InvalidArgumentError(
                f"时间步长 {self.dt} 不能整除终止时刻 {self.t_final}"
            )

    @property
    def n_steps(self) -> int:
        return round(self.t_final / self.dt)

    def time_of(self, step: int) -> float:
        """第 step 步对应的时刻（最后一步精确等于 T）"""
        return self.t_final if step == self.n_steps else step * self.dt


@dataclass(eq=False)
class GalerkinState:
    """某一时刻的粗网格半离散状态"""
    t: float
    u: FEField
    p: FEField
    udot: Optional[FEField] = None
    # 恢复 u̇ 时得到的瞬时压力，满足时刻 t 的半离散动量方程
    p_consistent: Optional[FEField] = None

    @property
    def space(self) -> FESpacePair:
        return self.u.space

    def energy(self, M: sp.spmatrix) -> float:
        """动能 ½ uᵀMu"""
        return 0.5 * float(self.u.coeffs @ (M @ self.u.coeffs))


class StepRecord(NamedTuple):
    """单步记录（时间序列 CSV 的一行）"""
    t: float
    energy: float
    newton_iters: int
    div_residual: float


class GalerkinEvolver:
    """粗网格时间演化器，缓存与时间无关的算子与分解"""

    def __init__(self, space: FESpacePair, config: EvolutionConfig,
                 ops: Optional[OperatorSet] = None):
        """
        初始化演化器

        Args:
            space: 粗网格混合空间
            config: 演化参数
            ops: 已组装的算子（可选）
        """
        self.space = space
        self.config = config
        self.logger = get_logger()
        self.ops = ops or assemble_operators(space, config.assembly_degree)
        self.gradient = pressure_gradient_coupling(self.ops)
        self.projector = LerayProjector(self.ops)
        self.history: List[StepRecord] = []
        self.energy_violations = 0
        self._stokes_factorization: Optional[SaddleFactorization] = None
        self._load_cache: Tuple[Optional[float], Optional[np.ndarray]] = (None, None)

    # ------------------------------------------------------------------
    # 基本算子
    # ------------------------------------------------------------------

    def load(self, t: float) -> np.ndarray:
        """载荷向量 (f(t), φ)，最近一次结果被缓存（相邻两步共用）"""
        cached_t, cached = self._load_cache
        if cached_t == t:
            return cached
        forcing = self.config.forcing
        if forcing is None:
            vec = np.zeros(self.space.n_u)
        else:
            vec = assemble_load(self.space, lambda x, y: forcing(x, y, t),
                                self.config.assembly_degree)
        self._load_cache = (t, vec)
        return vec

    def convection_matrix(self, coeffs: np.ndarray) -> Optional[sp.csr_matrix]:
        """N_skew(u)；Stokes 模式下为 None"""
        if not self.config.convection:
            return None
        u = FEField(self.space, FieldRole.VELOCITY, coeffs)
        return assemble_convection(self.space, u, ConvectionMode.SKEW,
                                   self.config.assembly_degree)

    def spatial_operator(self, coeffs: np.ndarray,
                         convection: Optional[sp.spmatrix] = None) -> np.ndarray:
        """R(u) = νK u + N_skew(u) u"""
        result = self.config.nu * (self.ops.K @ coeffs)
        if self.config.convection:
            if convection is None:
                convection = self.convection_matrix(coeffs)
            result = result + convection @ coeffs
        return result

    def divergence_residual(self, u: FEField) -> float:
        return float(np.linalg.norm(self.ops.B @ u.coeffs, np.inf))

    # ------------------------------------------------------------------
    # 演化
    # ------------------------------------------------------------------

    def initial_state(self, u0: Union[VelocityFunc, FEField], t0: float = 0.0) -> GalerkinState:
        """
        初始状态：初值插值后做离散 Leray 投影

        Args:
            u0: 解析初值 u0(x, y) 或本空间上的速度场
            t0: 初始时刻

        Returns:
            离散无散的初始状态（压力为零）
        """
        if isinstance(u0, FEField):
            if u0.space is not self.space or not u0.is_velocity:
                raise InvalidArgumentError("初值必须是本空间的速度场")
            interp = u0
        else:
            interp = interpolate(self.space, FieldRole.VELOCITY, u0)
        u = self.projector.project(interp)
        p = FEField.zeros(self.space, FieldRole.PRESSURE)
        return GalerkinState(t=t0, u=u, p=p)

    def _solve_newton_system(self, jacobian: sp.spmatrix, rhs: np.ndarray):
        if not self.config.convection:
            if self._stokes_factorization is None:
                system = SaddleSystem(self.space, jacobian, self.ops.B, self.ops.m_p, rhs)
                self._stokes_factorization = SaddleFactorization(system)
            return self._stokes_factorization.solve(rhs)
        system = SaddleSystem(self.space, jacobian, self.ops.B, self.ops.m_p, rhs)
        return SaddleFactorization(system).solve()

    def step(self, state: GalerkinState, step_index: Optional[int] = None) -> Tuple[GalerkinState, int]:
        """
        梯形法则推进一步

        求解 M(uⁿ⁺¹-uⁿ)/dt + ½[R(uⁿ⁺¹) + R(uⁿ)] - BᵀP = ½(Fⁿ + Fⁿ⁺¹)，B uⁿ⁺¹ = 0。
        Newton Jacobian 为 M/dt + ½[νK + N_skew(u_k) + (δ ↦ N_skew(δ)u_k)]，
        初始猜测取上一步的解。

        Args:
            state: 当前状态
            step_index: 步编号（出错时用于定位）

        Returns:
            (新状态, Newton 迭代次数)

        Raises:
            NewtonConvergenceError: 超过最大迭代次数仍未收敛
        """
        cfg = self.config
        ops = self.ops
        dt = cfg.dt
        t1 = cfg.time_of(step_index) if step_index is not None else state.t + dt

        u_old = state.u.coeffs
        rhs = (ops.M @ u_old) / dt - 0.5 * self.spatial_operator(u_old) \
            + 0.5 * (self.load(state.t) + self.load(t1))
        bound = cfg.newton_tol * (1.0 + float(np.linalg.norm(rhs, np.inf)))

        uk = u_old.copy()
        pressure = np.zeros(self.space.n_p)
        residual = float('inf')
        for iteration in range(cfg.newton_max_iter + 1):
            conv = self.convection_matrix(uk)
            nonlinear = (ops.M @ uk) / dt + 0.5 * self.spatial_operator(uk, conv) - rhs
            if iteration > 0:
                residual = float(np.linalg.norm(nonlinear + self.gradient @ pressure, np.inf))
                self.logger.debug(f"  Newton 第 {iteration} 次: 残差 {residual:.3e}")
                if residual <= bound:
                    break
            if iteration == cfg.newton_max_iter:
                raise NewtonConvergenceError(residual, iteration, step_index)

            jacobian = ops.M / dt + 0.5 * cfg.nu * ops.K
            if conv is not None:
                u_field = FEField(self.space, FieldRole.VELOCITY, uk)
                derivative = assemble_skew_wind_derivative(self.space, u_field,
                                                           cfg.assembly_degree)
                jacobian = jacobian + 0.5 * (conv + derivative)
            solution = self._solve_newton_system(jacobian.tocsr(), -nonlinear)
            uk = uk + solution.velocity.coeffs
            pressure = solution.pressure.coeffs

        u_new = FEField(self.space, FieldRole.VELOCITY, uk)
        p_new = normalize_pressure(FEField(self.space, FieldRole.PRESSURE, pressure))
        return GalerkinState(t=t1, u=u_new, p=p_new), iteration

    def recover_time_derivative(self, state: GalerkinState) -> Tuple[FEField, FEField]:
        """
        由半离散方程恢复时间导数

        求解 M u̇ - Bᵀq = F(t) - νKu - N_skew(u)u + Bᵀp，B u̇ = 0。
        p + q 即时刻 t 的瞬时（一致）压力。

        Args:
            state: 当前状态

        Returns:
            (u̇, 一致压力)
        """
        ops = self.ops
        rhs = self.load(state.t) - self.spatial_operator(state.u.coeffs) \
            - self.gradient @ state.p.coeffs
        solution = self.projector.factorization.solve(rhs)
        udot = solution.velocity
        consistent = normalize_pressure(state.p.copy_with(state.p.coeffs + solution.pressure.coeffs))
        self.logger.debug(
            f"恢复时间导数: t={state.t:.6g}, ‖Bu̇‖∞={self.divergence_residual(udot):.3e}"
        )
        return udot, consistent

    def _record(self, state: GalerkinState, iterations: int, initial_energy: float) -> None:
        energy = state.energy(self.ops.M)
        div = self.divergence_residual(state.u)
        if div > DIVERGENCE_TOL:
            self.logger.warning(f"t={state.t:.6g}: 离散散度残差 {div:.3e} 超过 {DIVERGENCE_TOL:g}")
        if self.config.forcing is None and self.history:
            previous = self.history[-1].energy
            if energy > previous + 1e-10 * max(initial_energy, 1e-300):
                self.energy_violations += 1
                self.logger.debug(
                    f"t={state.t:.6g}: 动能增加 {energy - previous:.3e}（无外力）"
                )
        self.history.append(StepRecord(state.t, energy, iterations, div))

    def run(self, u0: Union[VelocityFunc, FEField]) -> GalerkinState:
        """
        从初值演化到终止时刻，并恢复终止时刻的 u̇ 与一致压力

        Args:
            u0: 解析初值或本空间速度场

        Returns:
            终止时刻状态（含 udot、p_consistent）

        Raises:
            NewtonConvergenceError: 带步编号
        """
        cfg = self.config
        self.history = []
        self.energy_violations = 0
        state = self.initial_state(u0)
        initial_energy = state.energy(self.ops.M)
        self._record(state, 0, initial_energy)

        self.logger.info(
            f"开始时间演化: {self.space.describe()}, ν={cfg.nu:g}, dt={cfg.dt:g}, "
            f"T={cfg.t_final:g}, 共 {cfg.n_steps} 步"
        )
        max_iters = 0
        for n in range(1, cfg.n_steps + 1):
            try:
                state, iterations = self.step(state, n)
            except NewtonConvergenceError as e:
                if e.step is None:
                    raise NewtonConvergenceError(e.residual, e.iterations, n) from e
                raise
            max_iters = max(max_iters, iterations)
            self._record(state, iterations, initial_energy)

        udot, consistent = self.recover_time_derivative(state)
        state = replace(state, udot=udot, p_consistent=consistent)
        if self.energy_violations:
            self.logger.warning(f"无外力情形下动能增加 {self.energy_violations} 次")
        self.logger.info(
            f"时间演化完成: t={state.t:g}, 最大 Newton 迭代 {max_iters} 次, "
            f"动能 {self.history[-1].energy:.6e}"
        )
        return state


def step_trapezoid(state: GalerkinState, config: EvolutionConfig,
                   evolver: Optional[GalerkinEvolver] = None) -> GalerkinState:
    """
    梯形法则推进一步

    Args:
        state: 当前状态
        config: 演化参数
        evolver: 可复用的演化器

    Returns:
        t + dt 时刻状态
    """
    evolver = evolver or GalerkinEvolver(state.space, config)
    new_state, _ = evolver.step(state)
    return new_state


def evolve(u0: Union[VelocityFunc, FEField], config: EvolutionConfig,
           space: FESpacePair) -> GalerkinState:
    """
    半离散 Galerkin 演化到终止时刻

    Args:
        u0: 初值
        config: 演化参数
        space: 粗网格空间

    Returns:
        终止时刻状态（含恢复的 udot）
    """
    return GalerkinEvolver(space, config).run(u0)


def recover_time_derivative(state: GalerkinState, config: EvolutionConfig) -> FEField:
    """由半离散方程恢复 u̇（见 GalerkinEvolver.recover_time_derivative）"""
    udot, _ = GalerkinEvolver(state.space, config).recover_time_derivative(state)
    return udot
