"""
参考单元形函数模块

P1、P2 以及三次泡函数，均以重心坐标表示。
梯度返回对重心坐标的偏导数，物理梯度为 Σ_k ∂φ/∂λ_k ∇λ_k。

局部自由度顺序：顶点（三角形顶点顺序），P2 的边中点（与顶点 1、2、3 相对），
mini 元最后为泡函数。
"""

from typing import Tuple

import numpy as np

BUBBLE_SCALE = 27.0


def _as_points(lam: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.asarray(lam, dtype=float))


def eval_p1(lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    P1 形函数

    Args:
        lam: 重心坐标 (3,) 或 (P, 3)

    Returns:
        (值 (P, 3), 重心偏导 (P, 3, 3))
    """
    pts = _as_points(lam)
    values = pts.copy()
    grads = np.broadcast_to(np.eye(3), (len(pts), 3, 3)).copy()
    return values, grads


def eval_p2(lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    P2 形函数：顶点 λi(2λi-1)，边 4λiλj

    Args:
        lam: 重心坐标 (3,) 或 (P, 3)

    Returns:
        (值 (P, 6), 重心偏导 (P, 6, 3))
    """
    pts = _as_points(lam)
    l1, l2, l3 = pts[:, 0], pts[:, 1], pts[:, 2]
    n = len(pts)

    values = np.empty((n, 6))
    values[:, 0] = l1 * (2 * l1 - 1)
    values[:, 1] = l2 * (2 * l2 - 1)
    values[:, 2] = l3 * (2 * l3 - 1)
    values[:, 3] = 4 * l2 * l3
    values[:, 4] = 4 * l3 * l1
    values[:, 5] = 4 * l1 * l2

    grads = np.zeros((n, 6, 3))
    grads[:, 0, 0] = 4 * l1 - 1
    grads[:, 1, 1] = 4 * l2 - 1
    grads[:, 2, 2] = 4 * l3 - 1
    grads[:, 3, 1] = 4 * l3
    grads[:, 3, 2] = 4 * l2
    grads[:, 4, 2] = 4 * l1
    grads[:, 4, 0] = 4 * l3
    grads[:, 5, 0] = 4 * l2
    grads[:, 5, 1] = 4 * l1
    return values, grads


def eval_bubble(lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    泡函数 27 λ1 λ2 λ3

    Args:
        lam: 重心坐标 (3,) 或 (P, 3)

    Returns:
        (值 (P, 1), 重心偏导 (P, 1, 3))
    """
    pts = _as_points(lam)
    l1, l2, l3 = pts[:, 0], pts[:, 1], pts[:, 2]
    values = (BUBBLE_SCALE * l1 * l2 * l3)[:, None]
    grads = np.empty((len(pts), 1, 3))
    grads[:, 0, 0] = BUBBLE_SCALE * l2 * l3
    grads[:, 0, 1] = BUBBLE_SCALE * l1 * l3
    grads[:, 0, 2] = BUBBLE_SCALE * l1 * l2
    return values, grads


def eval_mini(lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """mini 元速度标量基：P1 加泡函数，共 4 个"""
    v1, g1 = eval_p1(lam)
    vb, gb = eval_bubble(lam)
    return np.concatenate([v1, vb], axis=1), np.concatenate([g1, gb], axis=1)


def physical_gradients(bary_grads: np.ndarray, grad_lambda: np.ndarray) -> np.ndarray:
    """
    重心偏导转换为物理梯度

    Args:
        bary_grads: (P, nloc, 3)
        grad_lambda: 对应三角形的 ∇λ，(P, 3, 2)

    Returns:
        (P, nloc, 2)
    """
    return np.einsum('plk,pkd->pld', bary_grads, grad_lambda)
