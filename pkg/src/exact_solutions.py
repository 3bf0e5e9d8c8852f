"""
制造解与初值模块

所有函数对 numpy 数组逐点求值，速度返回形状 (2, ...)，速度梯度 G[α, β] = ∂_β u_α
返回形状 (2, 2, ...)。
"""

from dataclasses import dataclass
from typing import Protocol

import numpy as np

PI = np.pi


class ExactSolution(Protocol):
    """误差计算所需的解析解接口"""

    def velocity(self, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray: ...

    def velocity_gradient(self, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray: ...

    def pressure(self, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray: ...


def _profile(x, y):
    """空间形状 U = (π sin²(πx) sin(2πy), -π sin²(πy) sin(2πx))"""
    sx, sy = np.sin(PI * x), np.sin(PI * y)
    return np.stack([
        PI * sx ** 2 * np.sin(2 * PI * y),
        -PI * sy ** 2 * np.sin(2 * PI * x),
    ])


def _profile_gradient(x, y):
    sx, sy = np.sin(PI * x), np.sin(PI * y)
    s2x, s2y = np.sin(2 * PI * x), np.sin(2 * PI * y)
    c2x, c2y = np.cos(2 * PI * x), np.cos(2 * PI * y)
    mixed = PI ** 2 * s2x * s2y
    return np.stack([
        np.stack([mixed, 2 * PI ** 2 * sx ** 2 * c2y]),
        np.stack([-2 * PI ** 2 * sy ** 2 * c2x, -mixed]),
    ])


def _profile_laplacian(x, y):
    sx, sy = np.sin(PI * x), np.sin(PI * y)
    s2x, s2y = np.sin(2 * PI * x), np.sin(2 * PI * y)
    c2x, c2y = np.cos(2 * PI * x), np.cos(2 * PI * y)
    return np.stack([
        2 * PI ** 3 * c2x * s2y - 4 * PI ** 3 * sx ** 2 * s2y,
        4 * PI ** 3 * sy ** 2 * s2x - 2 * PI ** 3 * s2x * c2y,
    ])


@dataclass(frozen=True)
class ManufacturedSolution:
    """
    制造解 u = g(t)·U(x, y)，p = g(t)·20x²y

    非定常时 g(t) = t（第一个数值实验），定常时 g ≡ 1。
    forcing 按 f = u_t - νΔu + (u·∇)u + ∇p 的解析表达式计算，
    convection=False 时不含对流项（Stokes 问题）。
    """
    nu: float = 0.05
    steady: bool = False
    convection: bool = True

    def time_factor(self, t: float) -> float:
        return 1.0 if self.steady else float(t)

    def time_derivative_factor(self, t: float) -> float:
        return 0.0 if self.steady else 1.0

    def velocity(self, x, y, t: float = 0.0) -> np.ndarray:
        return self.time_factor(t) * _profile(x, y)

    def velocity_gradient(self, x, y, t: float = 0.0) -> np.ndarray:
        return self.time_factor(t) * _profile_gradient(x, y)

    def velocity_laplacian(self, x, y, t: float = 0.0) -> np.ndarray:
        return self.time_factor(t) * _profile_laplacian(x, y)

    def pressure(self, x, y, t: float = 0.0) -> np.ndarray:
        return self.time_factor(t) * 20.0 * np.asarray(x) ** 2 * np.asarray(y)

    def pressure_gradient(self, x, y, t: float = 0.0) -> np.ndarray:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return self.time_factor(t) * np.stack([40.0 * x * y, 20.0 * x ** 2])

    def forcing(self, x, y, t: float = 0.0) -> np.ndarray:
        """f(x, y, t)，形状 (2, ...)"""
        g = self.time_factor(t)
        f = self.time_derivative_factor(t) * _profile(x, y) \
            - self.nu * g * _profile_laplacian(x, y) \
            + self.pressure_gradient(x, y, t)
        if self.convection and g != 0.0:
            u = g * _profile(x, y)
            grad = g * _profile_gradient(x, y)
            f = f + np.einsum('b...,ab...->a...', u, grad)
        return f


def exp1_solution(nu: float = 0.05) -> ManufacturedSolution:
    """第一个实验的非定常制造解"""
    return ManufacturedSolution(nu=nu, steady=False, convection=True)


def steady_stokes_solution(nu: float = 1.0) -> ManufacturedSolution:
    """定常 Stokes 制造解"""
    return ManufacturedSolution(nu=nu, steady=True, convection=False)


def steady_oseen_solution(nu: float = 1.0) -> ManufacturedSolution:
    """定常 Oseen 制造解（风场取精确速度本身）"""
    return ManufacturedSolution(nu=nu, steady=True, convection=True)


def mms_forcing_exp1(x, y, t: float, nu: float = 0.05) -> np.ndarray:
    """
    第一个实验的外力 f = u_t - νΔu + (u·∇)u + ∇p

    Args:
        x, y: 坐标（标量或数组）
        t: 时刻
        nu: 粘性系数

    Returns:
        形状 (2, ...) 的外力
    """
    return exp1_solution(nu).forcing(x, y, t)


def exp2_initial_velocity(x, y) -> np.ndarray:
    """
    第二个实验的初值（外力为零）

    u¹ = -6 sin³(πx) sin²(πy) cos(πy)，u² = 6 sin²(πx) sin³(πy) cos(πx)
    """
    sx, sy = np.sin(PI * x), np.sin(PI * y)
    return np.stack([
        -6.0 * sx ** 3 * sy ** 2 * np.cos(PI * y),
        6.0 * sx ** 2 * sy ** 3 * np.cos(PI * x),
    ])
