"""
配置管理模块

支持从配置文件和环境变量加载配置，优先级：命令行参数 > 环境变量 > 配置文件 > 默认值
"""

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml
from dotenv import load_dotenv

from .exceptions import InvalidArgumentError

ENV_PREFIX = "TGNS_"


def parse_pairs(value: Any) -> List[Tuple[int, int]]:
    """
    解析 (粗网格, 细网格) 剖分数对

    Args:
        value: "6:20,8:26" 形式的字符串，或 [[6, 20], [8, 26]] 形式的列表

    Returns:
        [(6, 20), (8, 26)]
    """
    if isinstance(value, str):
        items = [item.strip() for item in value.split(",") if item.strip()]
        try:
            pairs = [tuple(int(part) for part in item.split(":")) for item in items]
        except ValueError:
            raise InvalidArgumentError(f"无法解析网格对: {value!r}") from None
    else:
        pairs = [tuple(int(part) for part in item) for item in value]
    if not pairs or any(len(p) != 2 or min(p) < 1 for p in pairs):
        raise InvalidArgumentError(f"网格对必须是正整数 H:h 形式: {value!r}")
    return [(p[0], p[1]) for p in pairs]


def parse_int_list(value: Any) -> List[int]:
    """解析 "8,16,32" 或 [8, 16, 32]"""
    if isinstance(value, str):
        value = [item for item in value.split(",") if item.strip()]
    try:
        result = [int(item) for item in value]
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"无法解析整数列表: {value!r}") from None
    if not result or min(result) < 1:
        raise InvalidArgumentError(f"列表元素必须为正整数: {value!r}")
    return result


def parse_float_list(value: Any) -> List[float]:
    """解析 "0.025,0.0125" 或列表；也接受 "1/40" 这样的分数"""
    if isinstance(value, str):
        value = [item.strip() for item in value.split(",") if item.strip()]
    result = []
    for item in value:
        try:
            if isinstance(item, str) and "/" in item:
                num, den = item.split("/", 1)
                result.append(float(num) / float(den))
            else:
                result.append(float(item))
        except (TypeError, ValueError, ZeroDivisionError):
            raise InvalidArgumentError(f"无法解析数值: {item!r}") from None
    if not result or min(result) <= 0:
        raise InvalidArgumentError(f"列表元素必须为正数: {value!r}")
    return result


@dataclass
class LoggingConfig:
    """日志配置"""
    level: str = "INFO"
    file: str = "logs/twogrid-ns.log"
    max_size: int = 10
    backup_count: int = 5


@dataclass
class OutputConfig:
    """输出配置"""
    directory: str = "results"


@dataclass
class NumericsConfig:
    """数值参数"""
    assembly_degree: int = 8
    error_degree: int = 10
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    solver_residual_tol: float = 1e-10


@dataclass
class Experiment1Config:
    """收敛阶实验（制造解）"""
    pairs: List[Tuple[int, int]] = field(
        default_factory=lambda: [(6, 20), (8, 26), (10, 32), (12, 36)]
    )
    nu: float = 0.05
    t_final: float = 0.5
    dt: float = 0.01
    workers: int = 1


@dataclass
class Experiment2Config:
    """后处理方法对比实验（无外力）"""
    nu: float = 0.01
    coarse: int = 10
    fine: int = 30
    dt: float = 0.005
    t_final: float = 0.5
    dump_grid: int = 101
    reference_n_subdiv: int = 40
    reference_dt: float = 0.0025
    cache_dir: str = "cache/reference"


@dataclass
class StokesMMSConfig:
    """定常 Stokes/Oseen 制造解收敛检查"""
    family: str = "mini"
    levels: List[int] = field(default_factory=lambda: [8, 16, 32])
    nu: float = 1.0
    problem: str = "stokes"


@dataclass
class TemporalConfig:
    """时间收敛阶检查"""
    n_subdiv: int = 10
    nu: float = 0.05
    t_final: float = 0.5
    dts: List[float] = field(default_factory=lambda: [1 / 40, 1 / 80, 1 / 160])
    reference_dt: float = 1 / 320


class Config:
    """配置管理器"""

    def __init__(self, config_path: Optional[str] = None):
        """
        初始化配置

        Args:
            config_path: 配置文件路径，如果为空则使用默认路径
        """
        load_dotenv()

        if config_path is None:
            base_dir = Path(__file__).parent.parent
            config_path = base_dir / "config" / "config.yaml"
        else:
            config_path = Path(config_path)
            if not config_path.exists():
                raise InvalidArgumentError(f"配置文件不存在: {config_path}")

        self.config_path = config_path
        self._raw_config: Dict[str, Any] = {}
        self._load_config()

        self.logging = self._parse_logging_config()
        self.output = self._parse_output_config()
        self.numerics = self._parse_numerics_config()
        self.experiment1 = self._parse_experiment1_config()
        self.experiment2 = self._parse_experiment2_config()
        self.stokes_mms = self._parse_stokes_mms_config()
        self.temporal = self._parse_temporal_config()

    def _load_config(self) -> None:
        """加载配置文件"""
        if self.config_path.exists():
            with open(self.config_path, 'r', encoding='utf-8') as f:
                try:
                    self._raw_config = yaml.safe_load(f) or {}
                except yaml.YAMLError as e:
                    raise InvalidArgumentError(f"配置文件格式错误 {self.config_path}: {e}") from e
        else:
            self._raw_config = {}
        if not isinstance(self._raw_config, dict):
            raise InvalidArgumentError(f"配置文件顶层必须是映射: {self.config_path}")

    def _get_env(self, key: str, default: Any = None) -> Any:
        """获取带前缀的环境变量"""
        return os.environ.get(ENV_PREFIX + key, default)

    def _section(self, name: str) -> Dict[str, Any]:
        section = self._raw_config.get(name) or {}
        if not isinstance(section, dict):
            raise InvalidArgumentError(f"配置节 {name} 必须是映射")
        return section

    def _parse_logging_config(self) -> LoggingConfig:
        """解析日志配置"""
        log_config = self._section('logging')
        defaults = LoggingConfig()
        return LoggingConfig(
            level=self._get_env('LOG_LEVEL', log_config.get('level', defaults.level)),
            file=self._get_env('LOG_FILE', log_config.get('file', defaults.file)),
            max_size=int(log_config.get('max_size', defaults.max_size)),
            backup_count=int(log_config.get('backup_count', defaults.backup_count))
        )

    def _parse_output_config(self) -> OutputConfig:
        out_config = self._section('output')
        return OutputConfig(
            directory=self._get_env('OUTPUT_DIR', out_config.get('directory', OutputConfig.directory))
        )

    def _parse_numerics_config(self) -> NumericsConfig:
        """解析数值参数"""
        num_config = self._section('numerics')
        defaults = NumericsConfig()
        newton_tol = self._get_env('NEWTON_TOL')
        newton_max_iter = self._get_env('NEWTON_MAX_ITER')
        return NumericsConfig(
            assembly_degree=int(num_config.get('assembly_degree', defaults.assembly_degree)),
            error_degree=int(num_config.get('error_degree', defaults.error_degree)),
            newton_tol=float(newton_tol) if newton_tol else float(num_config.get('newton_tol', defaults.newton_tol)),
            newton_max_iter=int(newton_max_iter) if newton_max_iter else int(num_config.get('newton_max_iter', defaults.newton_max_iter)),
            solver_residual_tol=float(num_config.get('solver_residual_tol', defaults.solver_residual_tol))
        )

    def _parse_experiment1_config(self) -> Experiment1Config:
        """解析实验一配置"""
        exp_config = self._section('experiment1')
        defaults = Experiment1Config()
        workers = self._get_env('WORKERS')
        return Experiment1Config(
            pairs=parse_pairs(exp_config['pairs']) if 'pairs' in exp_config else defaults.pairs,
            nu=float(exp_config.get('nu', defaults.nu)),
            t_final=float(exp_config.get('t_final', defaults.t_final)),
            dt=float(exp_config.get('dt', defaults.dt)),
            workers=int(workers) if workers else int(exp_config.get('workers', defaults.workers))
        )

    def _parse_experiment2_config(self) -> Experiment2Config:
        """解析实验二配置"""
        exp_config = self._section('experiment2')
        defaults = Experiment2Config()
        return Experiment2Config(
            nu=float(exp_config.get('nu', defaults.nu)),
            coarse=int(exp_config.get('coarse', defaults.coarse)),
            fine=int(exp_config.get('fine', defaults.fine)),
            dt=float(exp_config.get('dt', defaults.dt)),
            t_final=float(exp_config.get('t_final', defaults.t_final)),
            dump_grid=int(exp_config.get('dump_grid', defaults.dump_grid)),
            reference_n_subdiv=int(exp_config.get('reference_n_subdiv', defaults.reference_n_subdiv)),
            reference_dt=float(exp_config.get('reference_dt', defaults.reference_dt)),
            cache_dir=self._get_env('CACHE_DIR', exp_config.get('cache_dir', defaults.cache_dir))
        )

    def _parse_stokes_mms_config(self) -> StokesMMSConfig:
        mms_config = self._section('stokes_mms')
        defaults = StokesMMSConfig()
        return StokesMMSConfig(
            family=str(mms_config.get('family', defaults.family)),
            levels=parse_int_list(mms_config['levels']) if 'levels' in mms_config else defaults.levels,
            nu=float(mms_config.get('nu', defaults.nu)),
            problem=str(mms_config.get('problem', defaults.problem))
        )

    def _parse_temporal_config(self) -> TemporalConfig:
        temp_config = self._section('temporal')
        defaults = TemporalConfig()
        return TemporalConfig(
            n_subdiv=int(temp_config.get('n_subdiv', defaults.n_subdiv)),
            nu=float(temp_config.get('nu', defaults.nu)),
            t_final=float(temp_config.get('t_final', defaults.t_final)),
            dts=parse_float_list(temp_config['dts']) if 'dts' in temp_config else defaults.dts,
            reference_dt=parse_float_list([temp_config['reference_dt']])[0]
            if 'reference_dt' in temp_config else defaults.reference_dt
        )

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式"""
        result = {
            'logging': asdict(self.logging),
            'output': asdict(self.output),
            'numerics': asdict(self.numerics),
            'experiment1': asdict(self.experiment1),
            'experiment2': asdict(self.experiment2),
            'stokes_mms': asdict(self.stokes_mms),
            'temporal': asdict(self.temporal),
        }
        result['experiment1']['pairs'] = [list(p) for p in self.experiment1.pairs]
        return result


def load_config(config_path: Optional[str] = None) -> Config:
    """
    加载配置

    Args:
        config_path: 配置文件路径

    Returns:
        配置对象
    """
    return Config(config_path)
