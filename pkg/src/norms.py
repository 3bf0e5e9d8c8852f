"""
误差范数与收敛阶模块
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exact_solutions import ExactSolution
from .exceptions import InvalidArgumentError, NumericalError
from .fe_space import FEField, evaluate_points, field_at_quadrature
from .quadrature import ERROR_DEGREE

ERROR_COLUMNS = ("err_u_L2", "err_u_H1", "err_p_L2", "err_u1_L2", "err_u1_H1")
SLOPE_MIN_LEVELS = 3


@dataclass
class ErrorReport:
    """一个方法在一个网格层上的误差"""
    method: str
    H: float
    h: float
    nu: float
    t: float
    err_u_L2: float
    err_u_H1: float
    err_p_L2: float
    err_u1_L2: float
    err_u1_H1: float

    def __post_init__(self):
        for name in ERROR_COLUMNS:
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise NumericalError(f"{self.method} 误差 {name} 非法: {value}")

    def to_row(self) -> Dict[str, object]:
        return asdict(self)


class DiscreteReference:
    """离散参考解（如细网格 Galerkin 演化结果）包装成解析解接口，忽略时间参数"""

    def __init__(self, velocity: FEField, pressure: Optional[FEField] = None):
        self.velocity_field = velocity
        self.pressure_field = pressure

    @staticmethod
    def _points(x, y) -> np.ndarray:
        return np.column_stack([np.ravel(x), np.ravel(y)])

    def velocity(self, x, y, t: float = 0.0) -> np.ndarray:
        values, _ = evaluate_points(self.velocity_field, self._points(x, y))
        return np.moveaxis(values, -1, 0).reshape((2,) + np.shape(x))

    def velocity_gradient(self, x, y, t: float = 0.0) -> np.ndarray:
        _, grads = evaluate_points(self.velocity_field, self._points(x, y), want_gradient=True)
        return np.moveaxis(grads, (1, 2), (0, 1)).reshape((2, 2) + np.shape(x))

    def pressure(self, x, y, t: float = 0.0) -> np.ndarray:
        if self.pressure_field is None:
            return np.zeros(np.shape(x))
        values, _ = evaluate_points(self.pressure_field, self._points(x, y))
        return values.reshape(np.shape(x))


def _quadrature_sum(weights: np.ndarray, values: np.ndarray) -> float:
    return float(np.einsum('tq,tq...->...', weights, values).sum())


def velocity_errors(velocity: FEField, exact: ExactSolution, t: float,
                    rule_degree: int = ERROR_DEGREE) -> Dict[str, float]:
    """
    速度误差（完整向量与第一分量）

    Args:
        velocity: 离散速度
        exact: 解析解
        t: 时刻
        rule_degree: 积分阶数

    Returns:
        err_u_L2, err_u_H1, err_u1_L2, err_u1_H1
    """
    space = velocity.space
    tables = space.tables(rule_degree)
    values, grads = field_at_quadrature(velocity, space, rule_degree, want_gradient=True)
    ex_values = np.moveaxis(np.asarray(exact.velocity(tables.x, tables.y, t)), 0, -1)
    ex_grads = np.moveaxis(np.asarray(exact.velocity_gradient(tables.x, tables.y, t)),
                           (0, 1), (2, 3))
    e = values - ex_values
    de = grads - ex_grads
    w = tables.weights

    l2_sq = _quadrature_sum(w, e ** 2)
    semi_sq = _quadrature_sum(w, de ** 2)
    l2_sq_1 = _quadrature_sum(w, e[..., 0] ** 2)
    semi_sq_1 = _quadrature_sum(w, de[..., 0, :] ** 2)
    return {
        'err_u_L2': math.sqrt(l2_sq),
        'err_u_H1': math.sqrt(l2_sq + semi_sq),
        'err_u1_L2': math.sqrt(l2_sq_1),
        'err_u1_H1': math.sqrt(l2_sq_1 + semi_sq_1),
    }


def pressure_error(pressure: FEField, exact: ExactSolution, t: float,
                   rule_degree: int = ERROR_DEGREE) -> float:
    """
    商空间 L²/ℝ 压力误差：两者各自减去均值后比较

    Args:
        pressure: 离散压力
        exact: 解析解
        t: 时刻
        rule_degree: 积分阶数
    """
    space = pressure.space
    mesh = space.mesh
    tables = space.tables(rule_degree)
    numeric = np.einsum('qk,tk->tq', tables.psi, pressure.coeffs[mesh.triangles])
    reference = np.asarray(exact.pressure(tables.x, tables.y, t), dtype=float)
    w = tables.weights
    area = float(w.sum())
    diff = (numeric - _quadrature_sum(w, numeric) / area) \
        - (reference - _quadrature_sum(w, reference) / area)
    return math.sqrt(_quadrature_sum(w, diff ** 2))


def compute_errors(
    numeric: Tuple[FEField, FEField],
    exact: ExactSolution,
    t: float,
    rule_degree: int = ERROR_DEGREE,
    method: str = "galerkin",
    H: float = float('nan'),
    h: float = float('nan'),
    nu: float = float('nan')
) -> ErrorReport:
    """
    计算速度 L²、H¹（完整范数）与压力 L²/ℝ 误差

    积分在离散场所在网格上进行。

    Args:
        numeric: (速度, 压力)
        exact: 解析解或离散参考解
        t: 时刻
        rule_degree: 积分阶数
        method: 方法标签
        H, h, nu: 报告中记录的参数

    Returns:
        误差报告
    """
    velocity, pressure = numeric
    if not velocity.is_velocity or pressure.is_velocity:
        raise InvalidArgumentError("compute_errors 需要 (速度, 压力)")
    errors = velocity_errors(velocity, exact, t, rule_degree)
    return ErrorReport(
        method=method, H=H, h=h, nu=nu, t=t,
        err_p_L2=pressure_error(pressure, exact, t, rule_degree),
        **errors,
    )


def slope_fit(errors: Sequence[Tuple[float, float]]) -> float:
    """
    log(err) 对 log(H) 的最小二乘斜率

    Args:
        errors: [(H, err), ...]，至少 3 个点

    Returns:
        斜率

    Raises:
        InvalidArgumentError: 点数不足或出现非正值
    """
    pairs = list(errors)
    if len(pairs) < SLOPE_MIN_LEVELS:
        raise InvalidArgumentError(f"收敛阶拟合至少需要 {SLOPE_MIN_LEVELS} 个网格层")
    sizes = np.array([p[0] for p in pairs], dtype=float)
    values = np.array([p[1] for p in pairs], dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0) or np.any(sizes <= 0.0):
        raise InvalidArgumentError(f"误差和网格尺寸必须为正: {pairs}")
    if len(np.unique(sizes)) < 2:
        raise InvalidArgumentError("网格尺寸必须互不相同")
    slope, _ = np.polyfit(np.log(sizes), np.log(values), 1)
    return float(slope)


@dataclass
class SlopeTable:
    """按 (方法, 范数) 的收敛阶"""
    slopes: Dict[Tuple[str, str], float] = field(default_factory=dict)

    @classmethod
    def from_reports(cls, reports: Iterable[ErrorReport],
                     norms: Sequence[str] = ERROR_COLUMNS,
                     size_attr: str = "H") -> 'SlopeTable':
        """
        由误差报告拟合收敛阶

        Args:
            reports: 误差报告
            norms: 需要拟合的列
            size_attr: 横轴使用的网格尺寸属性（H 或 h）
        """
        by_method: Dict[str, List[ErrorReport]] = {}
        for report in reports:
            by_method.setdefault(report.method, []).append(report)
        table = cls()
        for method, rows in by_method.items():
            if len(rows) < SLOPE_MIN_LEVELS:
                continue
            for norm in norms:
                table.slopes[(method, norm)] = slope_fit(
                    [(getattr(r, size_attr), getattr(r, norm)) for r in rows]
                )
        return table

    def get(self, method: str, norm: str) -> float:
        try:
            return self.slopes[(method, norm)]
        except KeyError:
            raise InvalidArgumentError(f"没有 {method}/{norm} 的收敛阶") from None

    def rows(self) -> List[Dict[str, object]]:
        return [
            {'method': method, 'norm': norm, 'slope': slope}
            for (method, norm), slope in sorted(self.slopes.items())
        ]
