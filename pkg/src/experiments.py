"""
实验驱动模块

- 定常 Stokes/Oseen 制造解的空间收敛阶
- 实验一：制造解上粗网格 Galerkin 与 Oseen 型后处理的收敛阶
- 实验二：无外力流动中 Galerkin、标准后处理、新后处理与细网格参考解的对比
- 时间收敛阶（Richardson 外推参考解）

相互独立的网格层可以并行计算，结果按 H 从大到小排序，保证输出确定。
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .assembly import (
    ConvectionMode,
    assemble_convection,
    assemble_load,
    assemble_operators,
)
from .cache import ReferenceCache, cache_key
from .config import (
    Experiment1Config,
    Experiment2Config,
    NumericsConfig,
    StokesMMSConfig,
    TemporalConfig,
)
from .exact_solutions import (
    ManufacturedSolution,
    exp1_solution,
    exp2_initial_velocity,
    steady_oseen_solution,
    steady_stokes_solution,
)
from .exceptions import InvalidArgumentError, TwoGridError
from .fe_space import (
    FEField,
    Family,
    FieldRole,
    build_space,
    evaluate_points,
    linear_part,
)
from .galerkin import EvolutionConfig, GalerkinEvolver, GalerkinState, StepRecord
from .logger import get_logger
from .mesh import build_unit_square_mesh
from .metrics import timed
from .norms import (
    DiscreteReference,
    ErrorReport,
    SlopeTable,
    compute_errors,
    slope_fit,
    velocity_errors,
)
from .postprocess import (
    PostprocessMethod,
    PostprocessRequest,
    postprocess_oseen,
    postprocess_stokes,
)
from .saddle_solver import SaddleSystem, solve_saddle

GALERKIN = "galerkin"
POSTPROCESSED = "postprocessed"
ORACLE_ADEQUACY_LIMIT = 0.5


# ----------------------------------------------------------------------
# 公共工具
# ----------------------------------------------------------------------

def run_parallel(func: Callable, items: Sequence, workers: int = 1) -> List:
    """
    对独立任务并行求值，结果保持输入顺序

    Args:
        func: 任务函数
        items: 任务参数
        workers: 线程数（1 时顺序执行）
    """
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def midline_total_variation(velocity: FEField, n_samples: int = 101) -> float:
    """
    第一分量沿水平中线 y = 0.5 的全变差 Σ|u¹(x_{i+1}) - u¹(x_i)|

    Args:
        velocity: 速度场
        n_samples: 采样点数
    """
    if n_samples < 2:
        raise InvalidArgumentError("中线采样点数至少为 2")
    xs = np.linspace(0.0, 1.0, n_samples)
    points = np.column_stack([xs, np.full(n_samples, 0.5)])
    values, _ = evaluate_points(velocity, points)
    return float(np.abs(np.diff(values[:, 0])).sum())


def _evolution_config(nu: float, dt: float, t_final: float, numerics: NumericsConfig,
                      forcing=None, convection: bool = True) -> EvolutionConfig:
    return EvolutionConfig(
        nu=nu, dt=dt, t_final=t_final,
        newton_tol=numerics.newton_tol,
        newton_max_iter=numerics.newton_max_iter,
        forcing=forcing,
        convection=convection,
        assembly_degree=numerics.assembly_degree,
    )


@timed("coarse_evolution")
def _run_coarse(evolver: GalerkinEvolver, u0) -> GalerkinState:
    return evolver.run(u0)


@timed("reference_evolution")
def _run_reference(evolver: GalerkinEvolver, u0) -> GalerkinState:
    return evolver.run(u0)


def _annotate(error: TwoGridError, context: str) -> TwoGridError:
    error.args = (f"[{context}] {error.args[0] if error.args else ''}",) + error.args[1:]
    return error


# ----------------------------------------------------------------------
# 定常制造解
# ----------------------------------------------------------------------

@dataclass
class ConvergenceStudy:
    """误差报告与收敛阶"""
    reports: List[ErrorReport]
    slopes: SlopeTable


def solve_steady_mms(n_subdiv: int, family: Family, solution: ManufacturedSolution,
                     numerics: Optional[NumericsConfig] = None) -> Tuple[FEField, FEField]:
    """
    在 N×N 网格上求解定常 Stokes（或以精确速度为风场的 Oseen）问题

    Args:
        n_subdiv: 剖分数
        family: 混合元类型
        solution: 定常制造解
        numerics: 数值参数

    Returns:
        (速度, 零均值压力)
    """
    numerics = numerics or NumericsConfig()
    space = build_space(build_unit_square_mesh(n_subdiv), family)
    ops = assemble_operators(space, numerics.assembly_degree)
    A = solution.nu * ops.K
    if solution.convection:
        A = A + assemble_convection(space, lambda x, y: solution.velocity(x, y),
                                    ConvectionMode.PLAIN, numerics.assembly_degree)
    load = assemble_load(space, lambda x, y: solution.forcing(x, y), numerics.assembly_degree)
    velocity, pressure, _ = solve_saddle(
        SaddleSystem(space, A.tocsr(), ops.B, ops.m_p, load), numerics.solver_residual_tol
    )
    return velocity, pressure


def run_stokes_mms(cfg: StokesMMSConfig, numerics: Optional[NumericsConfig] = None,
                   workers: int = 1) -> ConvergenceStudy:
    """
    定常制造解收敛检查

    Args:
        cfg: 元类型、网格层、ν、问题类型（stokes / oseen）
        numerics: 数值参数
        workers: 并行线程数

    Returns:
        各层误差与收敛阶（对 H 拟合）
    """
    numerics = numerics or NumericsConfig()
    family = Family(cfg.family)
    if cfg.problem == "stokes":
        solution = steady_stokes_solution(cfg.nu)
    elif cfg.problem == "oseen":
        solution = steady_oseen_solution(cfg.nu)
    else:
        raise InvalidArgumentError(f"未知问题类型: {cfg.problem}")
    logger = get_logger()
    method = f"{family.value}-{cfg.problem}"
    levels = sorted(set(cfg.levels))

    def one_level(n: int) -> ErrorReport:
        with logger.context(f"{method} N={n}"):
            logger.info("求解稳态问题")
            try:
                fields = solve_steady_mms(n, family, solution, numerics)
            except TwoGridError as e:
                raise _annotate(e, f"{method} N={n}")
        return compute_errors(fields, solution, 0.0, numerics.error_degree,
                              method=method, H=1.0 / n, h=1.0 / n, nu=cfg.nu)

    reports = run_parallel(one_level, levels, workers)
    slopes = SlopeTable.from_reports(reports) if len(reports) >= 3 else SlopeTable()
    for row in slopes.rows():
        logger.info(f"收敛阶 {row['method']} {row['norm']}: {row['slope']:.3f}")
    return ConvergenceStudy(reports, slopes)


# ----------------------------------------------------------------------
# 实验一
# ----------------------------------------------------------------------

def run_pair(H_subdiv: int, h_subdiv: int, cfg: Experiment1Config,
             numerics: Optional[NumericsConfig] = None) -> List[ErrorReport]:
    """
    单个 (H, h) 网格对：粗网格演化到 T、恢复 u̇、Oseen 后处理，计算两者误差

    报告中只使用 mini 速度的线性部分；Galerkin 压力取恢复得到的瞬时压力。

    Returns:
        [Galerkin 报告, 后处理报告]
    """
    numerics = numerics or NumericsConfig()
    logger = get_logger()
    context = f"H=1/{H_subdiv}, h=1/{h_subdiv}"
    with logger.context(context):
        return _run_pair(H_subdiv, h_subdiv, cfg, numerics, context)


def _run_pair(H_subdiv: int, h_subdiv: int, cfg: Experiment1Config,
              numerics: NumericsConfig, context: str) -> List[ErrorReport]:
    logger = get_logger()
    solution = exp1_solution(cfg.nu)
    H, h = 1.0 / H_subdiv, 1.0 / h_subdiv
    try:
        coarse = build_space(build_unit_square_mesh(H_subdiv), Family.MINI)
        evolver = GalerkinEvolver(coarse, _evolution_config(
            cfg.nu, cfg.dt, cfg.t_final, numerics, forcing=solution.forcing))
        state = _run_coarse(evolver, lambda x, y: solution.velocity(x, y, 0.0))

        fine = build_space(build_unit_square_mesh(h_subdiv), Family.MINI)
        request = PostprocessRequest(state=state, fine_space=fine, nu=cfg.nu,
                                     forcing=solution.forcing,
                                     method=PostprocessMethod.OSEEN_NEW,
                                     degree=numerics.assembly_degree)
        post_u, post_p = postprocess_oseen(request)
    except TwoGridError as e:
        raise _annotate(e, context)

    t = state.t
    galerkin = compute_errors((linear_part(state.u), state.p_consistent), solution, t,
                              numerics.error_degree, method=GALERKIN, H=H, h=H, nu=cfg.nu)
    post = compute_errors((linear_part(post_u), post_p), solution, t,
                          numerics.error_degree, method=POSTPROCESSED, H=H, h=h, nu=cfg.nu)
    logger.info(
        f"Galerkin H¹ {galerkin.err_u_H1:.4e}, 后处理 H¹ {post.err_u_H1:.4e}; "
        f"压力 {galerkin.err_p_L2:.4e} → {post.err_p_L2:.4e}"
    )
    return [galerkin, post]


def run_experiment1(cfg: Experiment1Config,
                    numerics: Optional[NumericsConfig] = None) -> ConvergenceStudy:
    """
    实验一：收敛阶

    Args:
        cfg: 网格对、ν、T、dt、并行线程数
        numerics: 数值参数

    Returns:
        按 H 从大到小、每层先 Galerkin 后后处理排列的报告，以及对 H 的收敛阶
    """
    pairs = sorted(set(cfg.pairs), key=lambda p: p[0])
    logger = get_logger()
    logger.info(f"实验一: {len(pairs)} 个网格对, ν={cfg.nu:g}, T={cfg.t_final:g}, dt={cfg.dt:g}")
    results = run_parallel(lambda p: run_pair(p[0], p[1], cfg, numerics), pairs, cfg.workers)
    reports = [r for pair_reports in results for r in pair_reports]
    slopes = SlopeTable.from_reports(reports) if len(pairs) >= 3 else SlopeTable()
    for row in slopes.rows():
        logger.info(f"收敛阶 {row['method']} {row['norm']}: {row['slope']:.3f}")
    return ConvergenceStudy(reports, slopes)


# ----------------------------------------------------------------------
# 参考解与实验二
# ----------------------------------------------------------------------

def reference_oracle(nu: float, t_final: float, n_subdiv: int = 40, dt: float = 1 / 400,
                     cache: Optional[ReferenceCache] = None,
                     numerics: Optional[NumericsConfig] = None) -> GalerkinState:
    """
    实验二的参考解：细网格 mini Galerkin 演化，按 (ν, T, N, dt) 缓存

    Args:
        nu: 粘性系数
        t_final: 终止时刻
        n_subdiv: 参考网格剖分数
        dt: 时间步长
        cache: 磁盘缓存（None 时不缓存）
        numerics: 数值参数

    Returns:
        终止时刻状态（p 为一致压力）
    """
    numerics = numerics or NumericsConfig()
    space = build_space(build_unit_square_mesh(n_subdiv), Family.MINI)

    def compute() -> Dict[str, np.ndarray]:
        get_logger().info(f"计算参考解: N={n_subdiv}, ν={nu:g}, dt={dt:g}")
        evolver = GalerkinEvolver(space, _evolution_config(nu, dt, t_final, numerics))
        state = _run_reference(evolver, exp2_initial_velocity)
        return {"u": state.u.coeffs, "p": state.p_consistent.coeffs,
                "udot": state.udot.coeffs}

    if cache is None:
        arrays = compute()
    else:
        params = {
            "kind": "free-flow-reference", "family": Family.MINI.value,
            "nu": float(nu), "t_final": float(t_final), "n_subdiv": int(n_subdiv),
            "dt": float(dt), "newton_tol": float(numerics.newton_tol),
            "assembly_degree": int(numerics.assembly_degree),
        }
        arrays = cache.get_or_compute(params, compute)
        expected = {"u": space.n_u, "p": space.n_p, "udot": space.n_u}
        if any(arrays.get(k) is None or arrays[k].shape != (n,) for k, n in expected.items()):
            get_logger().warning("缓存的参考解维数与网格不符，重新计算")
            arrays = compute()
            cache.set(cache_key(params), arrays, params)

    return GalerkinState(
        t=t_final,
        u=FEField(space, FieldRole.VELOCITY, arrays["u"]),
        p=FEField(space, FieldRole.PRESSURE, arrays["p"]),
        udot=FEField(space, FieldRole.VELOCITY, arrays["udot"]),
        p_consistent=FEField(space, FieldRole.PRESSURE, arrays["p"]),
    )


def oracle_adequacy(reference: GalerkinState, coarser: GalerkinState,
                    measured_h1: Sequence[float], degree: int = 10) -> float:
    """
    参考解充分性比值 ‖u_ref - u_coarser‖_H¹ / min(被比较方法的 H¹ 误差)

    比值 < 0.5 时参考解足以区分各方法。
    """
    diff = velocity_errors(linear_part(coarser.u), DiscreteReference(linear_part(reference.u)),
                           reference.t, degree)['err_u_H1']
    smallest = min(measured_h1)
    if smallest <= 0.0:
        return math.inf
    return diff / smallest


@dataclass
class ComparisonResult:
    """实验二结果"""
    reports: List[ErrorReport]
    midline_tv: Dict[str, float]
    fields: Dict[str, FEField]
    adequacy_ratio: Optional[float] = None
    history: List[StepRecord] = field(default_factory=list)

    @property
    def oracle_adequate(self) -> Optional[bool]:
        if self.adequacy_ratio is None:
            return None
        return self.adequacy_ratio < ORACLE_ADEQUACY_LIMIT

    def report(self, method: str) -> ErrorReport:
        for r in self.reports:
            if r.method == method:
                return r
        raise InvalidArgumentError(f"没有方法 {method} 的结果")

    def rows(self) -> List[Dict[str, object]]:
        """对比表：误差列加中线全变差"""
        return [dict(r.to_row(), midline_tv=self.midline_tv[r.method]) for r in self.reports]


def run_experiment2(cfg: Experiment2Config, numerics: Optional[NumericsConfig] = None,
                    cache: Optional[ReferenceCache] = None,
                    check_oracle: bool = True) -> ComparisonResult:
    """
    实验二：Galerkin、标准后处理与新后处理对比（f = 0）

    Args:
        cfg: ν、粗/细网格、dt、T、采样点数、参考解参数
        numerics: 数值参数
        cache: 参考解缓存
        check_oracle: 是否计算参考解充分性比值（需要多一次 N=32 的参考演化）

    Returns:
        对比结果
    """
    numerics = numerics or NumericsConfig()
    logger = get_logger()
    context = f"ν={cfg.nu:g}, H=1/{cfg.coarse}, h=1/{cfg.fine}"
    logger.info(f"实验二: {context}, T={cfg.t_final:g}, dt={cfg.dt:g}")

    with logger.context(f"H=1/{cfg.coarse}, h=1/{cfg.fine}"):
        return _run_experiment2(cfg, numerics, cache, check_oracle, context)


def _run_experiment2(cfg: Experiment2Config, numerics: NumericsConfig,
                     cache: Optional[ReferenceCache],
                     check_oracle: bool, context: str) -> ComparisonResult:
    logger = get_logger()
    H, h = 1.0 / cfg.coarse, 1.0 / cfg.fine

    try:
        coarse = build_space(build_unit_square_mesh(cfg.coarse), Family.MINI)
        evolver = GalerkinEvolver(coarse, _evolution_config(cfg.nu, cfg.dt, cfg.t_final, numerics))
        state = _run_coarse(evolver, exp2_initial_velocity)

        fine = build_space(build_unit_square_mesh(cfg.fine), Family.MINI)
        fine_ops = assemble_operators(fine, numerics.assembly_degree)
        outputs = {}
        for method, solver in ((PostprocessMethod.STOKES_STANDARD, postprocess_stokes),
                               (PostprocessMethod.OSEEN_NEW, postprocess_oseen)):
            request = PostprocessRequest(state=state, fine_space=fine, nu=cfg.nu,
                                         method=method, fine_ops=fine_ops,
                                         degree=numerics.assembly_degree)
            outputs[method.value] = solver(request)

        reference = reference_oracle(cfg.nu, cfg.t_final, cfg.reference_n_subdiv,
                                     cfg.reference_dt, cache, numerics)
    except TwoGridError as e:
        raise _annotate(e, context)

    exact = DiscreteReference(linear_part(reference.u), reference.p)
    t = state.t
    fields = {GALERKIN: linear_part(state.u)}
    reports = [compute_errors((fields[GALERKIN], state.p_consistent), exact, t,
                              numerics.error_degree, method=GALERKIN, H=H, h=H, nu=cfg.nu)]
    for name, (u_post, p_post) in outputs.items():
        fields[name] = linear_part(u_post)
        reports.append(compute_errors((fields[name], p_post), exact, t, numerics.error_degree,
                                      method=name, H=H, h=h, nu=cfg.nu))
    fields["reference"] = linear_part(reference.u)

    midline = {r.method: midline_total_variation(fields[r.method], cfg.dump_grid)
               for r in reports}
    for r in reports:
        logger.info(
            f"{r.method}: H¹ 误差 {r.err_u_H1:.4e}, L² 误差 {r.err_u_L2:.4e}, "
            f"中线全变差 {midline[r.method]:.4f}"
        )

    ratio = None
    if check_oracle:
        # 比参考网格粗一级的同类演化
        coarser_n = max(cfg.fine + 2, int(round(cfg.reference_n_subdiv * 0.8)))
        if coarser_n < cfg.reference_n_subdiv:
            coarser = reference_oracle(cfg.nu, cfg.t_final, coarser_n, cfg.reference_dt,
                                       cache, numerics)
            ratio = oracle_adequacy(reference, coarser, [r.err_u_H1 for r in reports],
                                    numerics.error_degree)
            status = "充分" if ratio < ORACLE_ADEQUACY_LIMIT else "不充分"
            logger.info(f"参考解充分性比值 (N={cfg.reference_n_subdiv} vs {coarser_n}): "
                        f"{ratio:.3f}（{status}）")

    return ComparisonResult(reports=reports, midline_tv=midline, fields=fields,
                            adequacy_ratio=ratio, history=list(evolver.history))


# ----------------------------------------------------------------------
# 时间收敛阶
# ----------------------------------------------------------------------

@dataclass
class TemporalStudy:
    """时间自收敛结果"""
    dts: List[float]
    err_L2: List[float]
    err_H1: List[float]
    slope_L2: float
    slope_H1: float
    newton_iterations: Dict[float, int] = field(default_factory=dict)

    def rows(self) -> List[Dict[str, float]]:
        return [{'dt': dt, 'err_u_L2': e0, 'err_u_H1': e1}
                for dt, e0, e1 in zip(self.dts, self.err_L2, self.err_H1)]


def run_temporal(cfg: TemporalConfig, numerics: Optional[NumericsConfig] = None,
                 workers: int = 1) -> TemporalStudy:
    """
    固定 H 的时间自收敛：实验一设置下对一组 dt 演化到 T

    参考解为最细两个步长（最小 dt 与 reference_dt = 其一半）的 Richardson 外推
    (4 u_{dt/2} - u_{dt}) / 3；误差为离散速度差的 L² 与 H¹ 范数。

    Args:
        cfg: 网格、ν、T、步长序列
        numerics: 数值参数
        workers: 并行线程数

    Returns:
        误差序列与对 dt 的收敛阶
    """
    numerics = numerics or NumericsConfig()
    dts = sorted(cfg.dts, reverse=True)
    finest = dts[-1]
    if not math.isclose(cfg.reference_dt * 2.0, finest, rel_tol=1e-12):
        raise InvalidArgumentError(
            f"reference_dt 必须是最小步长的一半: {cfg.reference_dt} vs {finest}"
        )
    solution = exp1_solution(cfg.nu)
    space = build_space(build_unit_square_mesh(cfg.n_subdiv), Family.MINI)
    ops = assemble_operators(space, numerics.assembly_degree)
    logger = get_logger()

    def final_velocity(dt: float) -> Tuple[np.ndarray, int]:
        evolver = GalerkinEvolver(space, _evolution_config(
            cfg.nu, dt, cfg.t_final, numerics, forcing=solution.forcing), ops=ops)
        state = _run_coarse(evolver, lambda x, y: solution.velocity(x, y, 0.0))
        return state.u.coeffs, max(r.newton_iters for r in evolver.history)

    runs = dict(zip(dts + [cfg.reference_dt],
                    run_parallel(final_velocity, dts + [cfg.reference_dt], workers)))
    reference = (4.0 * runs[cfg.reference_dt][0] - runs[finest][0]) / 3.0

    err_l2, err_h1 = [], []
    for dt in dts:
        e = runs[dt][0] - reference
        l2_sq = float(e @ (ops.M @ e))
        err_l2.append(math.sqrt(l2_sq))
        err_h1.append(math.sqrt(l2_sq + float(e @ (ops.K @ e))))
        logger.info(f"dt={dt:g}: L² {err_l2[-1]:.4e}, H¹ {err_h1[-1]:.4e}")

    study = TemporalStudy(
        dts=dts, err_L2=err_l2, err_H1=err_h1,
        slope_L2=slope_fit(list(zip(dts, err_l2))),
        slope_H1=slope_fit(list(zip(dts, err_h1))),
        newton_iterations={dt: runs[dt][1] for dt in runs},
    )
    logger.info(f"时间收敛阶: L² {study.slope_L2:.3f}, H¹ {study.slope_H1:.3f}")
    return study
