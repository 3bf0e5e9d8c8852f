"""
计算阶段耗时统计

记录粗网格演化、时间导数恢复、细网格后处理、参考解演化等阶段的调用次数和耗时。
统计结果只写入日志，不进入 CSV 输出。
"""

import time
from collections import defaultdict
from dataclasses import dataclass
from functools import wraps
from threading import Lock
from typing import Any, Dict, Optional


@dataclass
class StageMetric:
    """单个阶段的耗时指标"""
    call_count: int = 0
    total_duration: float = 0.0
    min_duration: float = float('inf')
    max_duration: float = 0.0
    error_count: int = 0

    @property
    def avg_duration(self) -> float:
        """平均耗时（毫秒）"""
        if self.call_count == 0:
            return 0.0
        return self.total_duration / self.call_count

    def record_call(self, duration: float, is_error: bool = False) -> None:
        """
        记录一次调用

        Args:
            duration: 耗时（秒）
            is_error: 是否以异常结束
        """
        self.call_count += 1
        duration_ms = duration * 1000
        self.total_duration += duration_ms
        self.min_duration = min(self.min_duration, duration_ms)
        self.max_duration = max(self.max_duration, duration_ms)
        if is_error:
            self.error_count += 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            'call_count': self.call_count,
            'error_count': self.error_count,
            'total_duration_ms': f"{self.total_duration:.2f}",
            'avg_duration_ms': f"{self.avg_duration:.2f}",
            'min_duration_ms': f"{self.min_duration:.2f}" if self.call_count else "0",
            'max_duration_ms': f"{self.max_duration:.2f}",
        }


class StageMetricsCollector:
    """阶段指标收集器（线程安全，供并行的独立实验共用）"""

    def __init__(self):
        self._metrics: Dict[str, StageMetric] = defaultdict(StageMetric)
        self._lock = Lock()

    def record_call(self, stage: str, duration: float, is_error: bool = False) -> None:
        with self._lock:
            self._metrics[stage].record_call(duration, is_error)

    def get_metric(self, stage: str) -> StageMetric:
        """
        获取指定阶段的指标

        Args:
            stage: 阶段名称

        Returns:
            阶段指标（未记录过时为空指标）
        """
        with self._lock:
            return self._metrics.get(stage, StageMetric())

    def get_all_metrics(self) -> Dict[str, Dict[str, Any]]:
        with self._lock:
            return {name: metric.to_dict() for name, metric in self._metrics.items()}

    def get_summary(self) -> Dict[str, Any]:
        """
        获取统计摘要

        Returns:
            总耗时、最耗时阶段等信息
        """
        with self._lock:
            total_calls = sum(m.call_count for m in self._metrics.values())
            total_duration = sum(m.total_duration for m in self._metrics.values())
            slowest = max(self._metrics.items(), key=lambda kv: kv[1].total_duration,
                          default=None)
            return {
                'total_calls': total_calls,
                'total_duration_ms': f"{total_duration:.2f}",
                'slowest_stage': {
                    'name': slowest[0],
                    'total_duration_ms': f"{slowest[1].total_duration:.2f}",
                } if slowest else None,
                'stage_count': len(self._metrics),
            }

    def cost_ratio(self, numerator: str, denominator: str) -> Optional[float]:
        """两个阶段总耗时之比（如细网格后处理 / 粗网格演化）"""
        with self._lock:
            num = self._metrics.get(numerator)
            den = self._metrics.get(denominator)
            if num is None or den is None or den.total_duration == 0.0:
                return None
            return num.total_duration / den.total_duration

    def reset(self) -> None:
        with self._lock:
            self._metrics.clear()


# 全局收集器
_collector = StageMetricsCollector()


def get_collector() -> StageMetricsCollector:
    """获取全局阶段指标收集器"""
    return _collector


def timed(stage: Optional[str] = None):
    """
    阶段计时装饰器

    Args:
        stage: 阶段名称，为 None 时使用函数名

    Usage:
        @timed("coarse_evolution")
        def evolve(...):
            ...
    """
    def decorator(func):
        name = stage or func.__name__

        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            is_error = False
            try:
                return func(*args, **kwargs)
            except Exception:
                is_error = True
                raise
            finally:
                _collector.record_call(name, time.perf_counter() - start_time, is_error)

        return wrapper
    return decorator


def log_cost_summary(logger, collector: Optional[StageMetricsCollector] = None) -> None:
    """把各阶段耗时写入日志"""
    collector = collector or _collector
    for name, metric in sorted(collector.get_all_metrics().items()):
        logger.info(
            f"阶段 {name}: 调用 {metric['call_count']} 次, "
            f"总耗时 {metric['total_duration_ms']} ms, 平均 {metric['avg_duration_ms']} ms"
        )
    ratio = collector.cost_ratio("fine_postprocess", "coarse_evolution")
    if ratio is not None:
        logger.info(f"细网格后处理耗时 / 粗网格演化耗时 = {ratio:.3f}")
