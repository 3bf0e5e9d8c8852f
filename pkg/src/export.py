"""
输出模块

CSV 表格（误差、对比、时间序列、网格采样场）由 pandas 写出，浮点数统一为
完整精度的科学计数法；网格与稀疏矩阵导出为纯文本。
"""

import sys
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from .fe_space import FEField, evaluate_points
from .galerkin import StepRecord
from .logger import get_logger
from .mesh import StructuredTriMesh
from .norms import ErrorReport

FLOAT_FORMAT = "%.17e"

ERRORS_COLUMNS = [
    "method", "H", "h", "nu", "t",
    "err_u_L2", "err_u_H1", "err_p_L2", "err_u1_L2", "err_u1_H1",
]
TIME_SERIES_COLUMNS = ["t", "energy", "newton_iters", "div_residual"]

PathLike = Union[str, Path]


def _open_target(path: PathLike):
    if str(path) == "-":
        return None
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def write_frame(frame: pd.DataFrame, path: PathLike) -> Optional[Path]:
    """
    写出 CSV（path 为 "-" 时写到标准输出）

    Args:
        frame: 表格
        path: 输出路径

    Returns:
        写出的文件路径，标准输出时为 None
    """
    target = _open_target(path)
    if target is None:
        frame.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return None
    frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    get_logger().info(f"已写出 {target}（{len(frame)} 行）")
    return target


def errors_frame(reports: Iterable[ErrorReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in reports], columns=ERRORS_COLUMNS)


def write_errors(reports: Iterable[ErrorReport], path: PathLike) -> Optional[Path]:
    """误差表：每个网格层每个方法一行"""
    return write_frame(errors_frame(reports), path)


def write_rows(rows: Sequence[Dict[str, object]], path: PathLike,
               columns: Optional[List[str]] = None) -> Optional[Path]:
    """任意行字典写成 CSV（对比表、收敛阶表等）"""
    return write_frame(pd.DataFrame(list(rows), columns=columns), path)


def write_time_series(history: Iterable[StepRecord], path: PathLike) -> Optional[Path]:
    """演化时间序列：t, energy, newton_iters, div_residual"""
    frame = pd.DataFrame([r._asdict() for r in history], columns=TIME_SERIES_COLUMNS)
    return write_frame(frame, path)


def grid_points(n: int) -> np.ndarray:
    """[0,1]² 上 n×n 的均匀采样点，x 变化最快"""
    coords = np.linspace(0.0, 1.0, n)
    xx, yy = np.meshgrid(coords, coords)
    return np.column_stack([xx.ravel(), yy.ravel()])


def sample_fields(fields: Dict[str, FEField], n: int) -> pd.DataFrame:
    """
    在均匀网格上采样多个场

    速度场输出 <name>_u1、<name>_u2 两列，压力场输出 <name>_p 一列。

    Args:
        fields: 名称 → 离散场
        n: 每个方向的采样点数

    Returns:
        表格（x, y, 各场列）
    """
    points = grid_points(n)
    data = {"x": points[:, 0], "y": points[:, 1]}
    for name, fld in fields.items():
        values, _ = evaluate_points(fld, points)
        if fld.is_velocity:
            data[f"{name}_u1"] = values[:, 0]
            data[f"{name}_u2"] = values[:, 1]
        else:
            data[f"{name}_p"] = values
    return pd.DataFrame(data)


def write_field_dump(fields: Dict[str, FEField], n: int, path: PathLike) -> Optional[Path]:
    """网格采样场导出（供外部绘图）"""
    return write_frame(sample_fields(fields, n), path)


def write_mesh(mesh: StructuredTriMesh, path: PathLike) -> Path:
    """
    网格纯文本导出

    每个顶点一行 "v x y"，随后每个三角形一行 "t i j k"（顶点编号从 0 开始）。
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as f:
        for x, y in mesh.vertices:
            f.write(f"v {x:.17e} {y:.17e}\n")
        for i, j, k in mesh.triangles:
            f.write(f"t {i} {j} {k}\n")
    get_logger().info(f"网格已导出: {target}（{mesh.n_vertices} 顶点, {mesh.n_triangles} 三角形）")
    return target


def write_matrix(matrix: sp.spmatrix, path: PathLike) -> Path:
    """稀疏矩阵导出为 "i j value" 三元组（行优先）"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    coo = sp.csr_matrix(matrix).tocoo()
    with open(target, "w", encoding="utf-8") as f:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            f.write(f"{i} {j} {v:.17e}\n")
    return target
