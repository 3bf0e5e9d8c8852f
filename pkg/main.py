#!/usr/bin/env python3
"""
两重网格后处理 Galerkin 方法

主入口文件
"""

from src.cli import main

if __name__ == '__main__':
    main()
