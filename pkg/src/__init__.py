"""
twogrid-ns

二维不可压 Navier-Stokes 方程的两重网格后处理混合有限元方法：
粗网格 Galerkin 时间演化 + 细网格一次线性（Oseen 或 Stokes）后处理
"""

__version__ = "1.0.0"
__author__ = "Numerics Team"
