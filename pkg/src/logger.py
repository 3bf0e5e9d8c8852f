"""
日志模块

网格规模、时间步、Newton 残差、求解规模等信息都经由此输出。
进度写到 stderr，stdout 留给 CSV/JSON；并行的网格层各自在线程内设置计算上下文
（如 "H=1/6, h=1/20"），每条日志都带上该上下文，便于区分交错输出。
"""

import logging
import sys
import threading
from contextlib import contextmanager
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Iterator, Optional

from colorama import Fore, Style, init

init(autoreset=True)

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(context)s%(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

_context = threading.local()


def current_context() -> str:
    """当前线程的计算上下文（未设置时为空串）"""
    return getattr(_context, "label", "")


class ContextFilter(logging.Filter):
    """把线程内的计算上下文写入 record.context"""

    def filter(self, record: logging.LogRecord) -> bool:
        label = current_context()
        record.context = f"[{label}] " if label else ""
        return True


class ColoredFormatter(logging.Formatter):
    """控制台格式：级别着色，上下文以青色显示"""

    COLORS = {
        logging.DEBUG: Fore.CYAN,
        logging.INFO: Fore.GREEN,
        logging.WARNING: Fore.YELLOW,
        logging.ERROR: Fore.RED,
    }

    def format(self, record):
        # 复制一份，文件处理器拿到的仍是无颜色码的 record
        record = logging.makeLogRecord(record.__dict__)
        color = self.COLORS.get(record.levelno, '')
        record.levelname = f"{color}{record.levelname}{Style.RESET_ALL}"
        if record.context:
            record.context = f"{Fore.CYAN}{record.context}{Style.RESET_ALL}"
        return super().format(record)


class Logger:
    """日志管理器（单例，setup_logger 可强制重新配置）"""

    _instance: Optional['Logger'] = None
    _initialized: bool = False

    def __new__(cls, *args, **kwargs):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(
        self,
        name: str = "twogrid-ns",
        level: str = "INFO",
        log_file: Optional[str] = None,
        max_size: int = 10,
        backup_count: int = 5,
        force: bool = False
    ):
        """
        Args:
            name: logging 名称
            level: 日志级别；DEBUG 时输出每次 Newton 迭代残差
            log_file: 日志文件路径，为空则只输出到控制台
            max_size: 单个日志文件上限（MB）
            backup_count: 轮转保留的文件数
            force: 已初始化时是否重新配置
        """
        if self._initialized and not force:
            return

        self.logger = logging.getLogger(name)
        self.logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))
        self.logger.propagate = False
        for handler in list(self.logger.handlers):
            handler.close()
        self.logger.handlers.clear()
        self.logger.filters.clear()
        self.logger.addFilter(ContextFilter())

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(ColoredFormatter(LOG_FORMAT, DATE_FORMAT))
        self.logger.addHandler(console_handler)

        if log_file:
            try:
                log_path = Path(log_file)
                log_path.parent.mkdir(parents=True, exist_ok=True)
                file_handler = RotatingFileHandler(
                    log_path,
                    maxBytes=max_size * 1024 * 1024,
                    backupCount=backup_count,
                    encoding='utf-8'
                )
                file_handler.setFormatter(logging.Formatter(LOG_FORMAT, DATE_FORMAT))
                self.logger.addHandler(file_handler)
            except OSError as e:
                self.logger.warning(f"无法创建日志文件 {log_file}: {e}，只输出到控制台")

        self._initialized = True

    @contextmanager
    def context(self, label: str) -> Iterator[None]:
        """
        在当前线程内为日志附加计算上下文，可嵌套

        Usage:
            with get_logger().context("H=1/6, h=1/20"):
                ...
        """
        previous = current_context()
        _context.label = f"{previous} | {label}" if previous else label
        try:
            yield
        finally:
            _context.label = previous

    def debug(self, message: str) -> None:
        self.logger.debug(message)

    def info(self, message: str) -> None:
        self.logger.info(message)

    def warning(self, message: str) -> None:
        self.logger.warning(message)

    def error(self, message: str) -> None:
        self.logger.error(message)

    def success(self, message: str) -> None:
        """验收项通过（INFO，带 ✓）"""
        self.logger.info(f"✓ {message}")

    def failure(self, message: str) -> None:
        """验收项失败（ERROR，带 ✗）"""
        self.logger.error(f"✗ {message}")


_logger: Optional[Logger] = None


def setup_logger(
    level: str = "INFO",
    log_file: Optional[str] = None,
    max_size: int = 10,
    backup_count: int = 5
) -> Logger:
    """配置全局日志（可重复调用，以最后一次为准）"""
    global _logger
    _logger = Logger(
        level=level,
        log_file=log_file,
        max_size=max_size,
        backup_count=backup_count,
        force=True
    )
    return _logger


def get_logger() -> Logger:
    """获取全局日志实例"""
    global _logger
    if _logger is None:
        _logger = Logger()
    return _logger
