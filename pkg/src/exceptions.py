"""
异常定义模块

数值计算流程中的错误类型，CLI 根据类型映射退出码
"""

from typing import Optional


class TwoGridError(Exception):
    """所有错误的基类"""


class InvalidArgumentError(TwoGridError, ValueError):
    """参数不合法（网格剖分数、积分阶数、场类型等）"""


class OutOfDomainError(TwoGridError, ValueError):
    """点不在单位正方形内"""

    def __init__(self, x: float, y: float):
        self.x = x
        self.y = y
        super().__init__(f"点 ({x!r}, {y!r}) 不在 [0,1]^2 内")


class NumericalError(TwoGridError, ArithmeticError):
    """出现非有限值等数值错误"""

    def __init__(self, message: str, triangle: Optional[int] = None):
        self.triangle = triangle
        if triangle is not None:
            message = f"{message} (三角形 {triangle})"
        super().__init__(message)


class SolverError(NumericalError):
    """鞍点系统分解或求解失败"""

    def __init__(self, message: str, size: Optional[int] = None, detail: str = ""):
        self.size = size
        self.detail = detail
        text = message
        if size is not None:
            text = f"{text} [系统规模 {size}]"
        if detail:
            text = f"{text}: {detail}"
        super().__init__(text)


class CoercivityError(SolverError):
    """Oseen 后处理系统奇异，粗网格尺寸 H 相对 ν 过大"""


class NewtonConvergenceError(NumericalError):
    """Newton 迭代在最大次数内未收敛"""

    def __init__(self, residual: float, iterations: int, step: Optional[int] = None):
        self.residual = residual
        self.iterations = iterations
        self.step = step
        where = f"第 {step} 步" if step is not None else "当前步"
        super().__init__(
            f"{where} Newton 迭代 {iterations} 次未收敛，残差 {residual:.3e}"
        )


class CacheCorruptionError(TwoGridError):
    """参考解缓存条目损坏（内部使用，触发重新计算）"""
