"""
命令行接口模块

提供命令行工具入口。退出码：0 成功，1 用法错误，2 数值失败（求解器 / Newton），
3 selftest 验收未通过。
"""

import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import click

from .acceptance import AcceptanceValidator, CheckStatus
from .assembly import assemble_operators
from .cache import ReferenceCache
from .config import Config, load_config, parse_float_list, parse_int_list, parse_pairs
from .exceptions import InvalidArgumentError, NumericalError, TwoGridError
from .experiments import (
    run_experiment1,
    run_experiment2,
    run_stokes_mms,
    run_temporal,
)
from .export import (
    write_errors,
    write_field_dump,
    write_matrix,
    write_mesh,
    write_rows,
    write_time_series,
)
from .fe_space import Family, build_space
from .logger import get_logger, setup_logger
from .mesh import build_unit_square_mesh
from .metrics import get_collector, log_cost_summary

EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPTANCE = 3

config_option = click.option(
    '--config', '-c',
    type=click.Path(exists=True),
    help='配置文件路径（YAML）'
)


def init_components(config_path: Optional[str] = None) -> Config:
    """加载配置并初始化日志"""
    config = load_config(config_path)

    log_file = config.logging.file
    if log_file and not Path(log_file).is_absolute():
        base_dir = Path(__file__).parent.parent
        log_file = str(base_dir / log_file)
    setup_logger(
        level=config.logging.level,
        log_file=log_file or None,
        max_size=config.logging.max_size,
        backup_count=config.logging.backup_count
    )
    get_collector().reset()
    return config


def _output_path(cfg: Config, out: Optional[str], default_name: str) -> str:
    return out if out else str(Path(cfg.output.directory) / default_name)


def _parse(parser, value, param: str):
    try:
        return parser(value)
    except InvalidArgumentError as e:
        raise click.BadParameter(str(e), param_hint=param) from None


@click.group()
@click.version_option(version="1.0.0")
def cli():
    """两重网格后处理 Galerkin 方法（二维不可压 Navier-Stokes）

    粗网格混合有限元时间演化，目标时刻在细网格上做一次线性后处理。
    """
    pass


@cli.command()
@config_option
@click.option('--pairs', help='网格对 "H:h,..."，如 "6:20,8:26,10:32,12:36"')
@click.option('--nu', type=float, help='粘性系数')
@click.option('--t-final', type=float, help='终止时刻')
@click.option('--dt', type=float, help='时间步长')
@click.option('--workers', type=int, help='并行线程数')
@click.option('--out', help='误差表输出路径（"-" 为标准输出）')
@click.option('--slopes-out', help='收敛阶表输出路径（可选）')
def converge(config, pairs, nu, t_final, dt, workers, out, slopes_out):
    """实验一：收敛阶

    制造解上的粗网格 Galerkin 演化与 Oseen 型后处理，输出每层误差并拟合收敛阶。
    """
    cfg = init_components(config)
    exp = cfg.experiment1
    overrides = {
        'pairs': _parse(parse_pairs, pairs, '--pairs') if pairs else None,
        'nu': nu, 't_final': t_final, 'dt': dt, 'workers': workers,
    }
    exp = replace(exp, **{k: v for k, v in overrides.items() if v is not None})

    study = run_experiment1(exp, cfg.numerics)
    write_errors(study.reports, _output_path(cfg, out, "errors.csv"))
    if slopes_out:
        write_rows(study.slopes.rows(), slopes_out, columns=['method', 'norm', 'slope'])
    log_cost_summary(get_logger())


@cli.command()
@config_option
@click.option('--nu', type=float, help='粘性系数（0.01 或 0.005）')
@click.option('--coarse', type=int, help='粗网格剖分数（H = 1/coarse）')
@click.option('--fine', type=int, help='细网格剖分数（h = 1/fine）')
@click.option('--dt', type=float, help='粗网格时间步长')
@click.option('--t-final', type=float, help='终止时刻')
@click.option('--dump-grid', type=int, help='采样网格每方向点数')
@click.option('--out', help='对比表输出路径')
@click.option('--dump-out', help='采样场输出路径')
@click.option('--series-out', help='粗网格演化时间序列输出路径（可选）')
@click.option('--cache-dir', help='参考解缓存目录')
@click.option('--no-oracle-check', is_flag=True, help='跳过参考解充分性检查')
def compare(config, nu, coarse, fine, dt, t_final, dump_grid, out, dump_out,
            series_out, cache_dir, no_oracle_check):
    """实验二：后处理方法对比

    无外力流动，比较粗网格 Galerkin、标准后处理与新后处理相对细网格参考解的误差。
    """
    cfg = init_components(config)
    overrides = {
        'nu': nu, 'coarse': coarse, 'fine': fine, 'dt': dt, 't_final': t_final,
        'dump_grid': dump_grid, 'cache_dir': cache_dir,
    }
    exp = replace(cfg.experiment2, **{k: v for k, v in overrides.items() if v is not None})

    result = run_experiment2(exp, cfg.numerics, ReferenceCache(exp.cache_dir),
                             check_oracle=not no_oracle_check)
    columns = ['method', 'H', 'h', 'nu', 't', 'err_u_L2', 'err_u_H1', 'err_p_L2',
               'err_u1_L2', 'err_u1_H1', 'midline_tv']
    write_rows(result.rows(), _output_path(cfg, out, "compare.csv"), columns=columns)
    write_field_dump(result.fields, exp.dump_grid,
                     _output_path(cfg, dump_out, f"fields_nu{exp.nu:g}.csv"))
    if series_out:
        write_time_series(result.history, series_out)
    if result.oracle_adequate is False:
        get_logger().warning("参考解不足以区分各方法（oracle insufficient）")
    log_cost_summary(get_logger())


@cli.command(name='stokes-mms')
@config_option
@click.option('--family', type=click.Choice([f.value for f in Family]), help='混合元类型')
@click.option('--levels', help='网格剖分数列表，如 "8,16,32"')
@click.option('--nu', type=float, help='粘性系数')
@click.option('--problem', type=click.Choice(['stokes', 'oseen']), help='定常问题类型')
@click.option('--workers', type=int, default=1, help='并行线程数')
@click.option('--out', help='误差表输出路径')
def stokes_mms(config, family, levels, nu, problem, workers, out):
    """定常 Stokes/Oseen 制造解收敛检查"""
    cfg = init_components(config)
    overrides = {
        'family': family, 'nu': nu, 'problem': problem,
        'levels': _parse(parse_int_list, levels, '--levels') if levels else None,
    }
    mms = replace(cfg.stokes_mms, **{k: v for k, v in overrides.items() if v is not None})
    study = run_stokes_mms(mms, cfg.numerics, workers)
    write_errors(study.reports, _output_path(cfg, out, f"mms_{mms.family}_{mms.problem}.csv"))


@cli.command()
@config_option
@click.option('--n-subdiv', type=int, help='粗网格剖分数')
@click.option('--dts', help='时间步长列表，如 "1/40,1/80,1/160"')
@click.option('--reference-dt', help='参考步长（最小步长的一半）')
@click.option('--workers', type=int, default=1, help='并行线程数')
@click.option('--out', help='输出路径')
def temporal(config, n_subdiv, dts, reference_dt, workers, out):
    """时间收敛阶检查（Richardson 外推参考解）"""
    cfg = init_components(config)
    overrides = {
        'n_subdiv': n_subdiv,
        'dts': _parse(parse_float_list, dts, '--dts') if dts else None,
        'reference_dt': _parse(parse_float_list, reference_dt, '--reference-dt')[0]
        if reference_dt else None,
    }
    temp = replace(cfg.temporal, **{k: v for k, v in overrides.items() if v is not None})
    study = run_temporal(temp, cfg.numerics, workers)
    write_rows(study.rows(), _output_path(cfg, out, "temporal.csv"),
               columns=['dt', 'err_u_L2', 'err_u_H1'])


@cli.command()
@config_option
@click.option('--full', is_flag=True, help='同时运行时间收敛阶与两个实验（耗时较长）')
@click.option('--out', help='验收报告输出路径（可选）')
def selftest(config, full, out):
    """运行验收检查

    快速模式：单元与积分、离散结构、强制性见证、定常制造解收敛阶。
    """
    cfg = init_components(config)
    validator = AcceptanceValidator()

    validator.validate_elements()
    validator.validate_structure()
    validator.validate_coercivity()
    for family in Family:
        mms = replace(cfg.stokes_mms, family=family.value, problem='stokes')
        validator.validate_stokes_mms(run_stokes_mms(mms, cfg.numerics), family)

    if full:
        validator.validate_temporal(run_temporal(cfg.temporal, cfg.numerics))
        validator.validate_experiment1(run_experiment1(cfg.experiment1, cfg.numerics))
        cache = ReferenceCache(cfg.experiment2.cache_dir)
        low = run_experiment2(replace(cfg.experiment2, nu=0.005), cfg.numerics, cache)
        high = run_experiment2(replace(cfg.experiment2, nu=0.01), cfg.numerics, cache)
        validator.validate_experiment2(low, high)
        log_cost_summary(get_logger())
    else:
        validator.mark("full_experiments", CheckStatus.SKIPPED, "未指定 --full，跳过时间收敛阶与两个实验")

    passed, _ = validator.summary()
    if out:
        write_rows(validator.report.rows(), out, columns=['check', 'status', 'value', 'message'])
    if not passed:
        sys.exit(EXIT_ACCEPTANCE)


@cli.command(name='dump-mesh')
@config_option
@click.option('--n', 'n_subdiv', type=int, required=True, help='剖分数 N')
@click.option('--out', help='输出路径')
@click.option('--matrix', type=click.Choice(['M', 'K', 'B']), help='同时导出的矩阵')
@click.option('--family', type=click.Choice([f.value for f in Family]), default='mini',
              help='导出矩阵时使用的混合元类型')
def dump_mesh(config, n_subdiv, out, matrix, family):
    """导出网格（以及可选的组装矩阵）为纯文本"""
    cfg = init_components(config)
    mesh = build_unit_square_mesh(n_subdiv)
    write_mesh(mesh, _output_path(cfg, out, f"mesh_{n_subdiv}.txt"))
    if matrix:
        ops = assemble_operators(build_space(mesh, Family(family)), cfg.numerics.assembly_degree)
        path = Path(cfg.output.directory) / f"{matrix}_{family}_{n_subdiv}.txt"
        write_matrix(getattr(ops, matrix), path)
        get_logger().info(f"矩阵 {matrix} 已导出: {path}")


@cli.command(name='show-config')
@config_option
def show_config(config):
    """显示当前配置"""
    cfg = load_config(config)

    click.echo("\n当前配置:")
    click.echo("=" * 60)
    click.echo(json.dumps(cfg.to_dict(), indent=2, ensure_ascii=False))


def main(argv: Optional[Sequence[str]] = None):
    """主入口：把异常映射为退出码"""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("已取消", err=True)
        sys.exit(EXIT_USAGE)
    except click.ClickException as e:
        e.show()
        sys.exit(EXIT_USAGE)
    except InvalidArgumentError as e:
        get_logger().error(f"参数错误: {e}")
        sys.exit(EXIT_USAGE)
    except NumericalError as e:
        get_logger().error(f"数值计算失败: {e}")
        sys.exit(EXIT_NUMERICAL)
    except TwoGridError as e:
        get_logger().error(f"运行失败: {e}")
        sys.exit(EXIT_NUMERICAL)
    sys.exit(0)


if __name__ == '__main__':
    main()
