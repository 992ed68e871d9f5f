# main.py
"""
Selberg zeta / Krein 相位批处理命令行主入口
业务逻辑：解析参数 -> 读取配置 -> 读取群描述 -> 按子命令调度 -> 写产物
"""
import argparse
import os
import sys
from pathlib import Path
from typing import Literal, Optional

from loguru import logger
from pydantic import BaseModel, Field, ValidationError, model_validator

from module.config_loader import ConfigLoader
from module.errors import GroupSpecError, SpectralError
from module.runner import SpectralRunner
from module.schottky import load_group_spec

COMMANDS = ('spectrum', 'delta', 'zeta', 'resonances', 'xi', 'dets', 'detpk', 'weyl', 'divisor', 'renorm')

# 日志：只去掉默认的 stderr 输出，各模块的文件 sink 保留
logger.remove(0)
logger.add(
    'logs/log_{time:YYYY-MM-DD}.log',
    rotation="00:00",
    level="INFO",
)


####################################
# 数据模型
class RunConfig(BaseModel):
    command: Literal[COMMANDS]
    group: Optional[Path] = Field(default=None)
    output: Optional[Path] = Field(default=None)
    env: Optional[str] = Field(default=None)
    config_dir: Path = Field(default=Path(__file__).parent / 'config')
    threads: Optional[int] = Field(default=None, ge=1, le=256)
    nodes: Optional[int] = Field(default=None, ge=4, le=512)
    l_max: Optional[float] = Field(default=None, gt=0, le=200)
    convention: Optional[Literal['oriented', 'unoriented']] = Field(default=None)
    grid: Optional[str] = Field(default=None)
    rect: Optional[str] = Field(default=None)
    zmax: Optional[float] = Field(default=None, gt=0)
    z_points: Optional[int] = Field(default=None, ge=2)
    k: Optional[int] = Field(default=None, ge=1)
    contour_side: Optional[Literal['upper', 'lower']] = Field(default=None)
    contour_radius: Optional[float] = Field(default=None, gt=0, lt=0.5)
    m_half: Optional[int] = Field(default=None, ge=0)
    T: Optional[float] = Field(default=None, ge=5)
    samples: Optional[int] = Field(default=None, ge=4)
    paper_literal: bool = Field(default=False)
    center: Optional[str] = Field(default=None)
    radius: Optional[float] = Field(default=None, gt=0)
    input: Optional[Path] = Field(default=None)
    exponents: Optional[str] = Field(default=None)
    log_depth: Optional[int] = Field(default=None, ge=0)
    weight: Optional[float] = Field(default=None)

    @model_validator(mode='after')
    def group_required(self):
        if self.command != 'renorm' and self.group is None:
            raise ValueError(f'子命令 {self.command} 需要 --group')
        return self


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Selberg zeta / Krein 相位数值工具')
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--group', help='群描述 JSON 文件')
    parser.add_argument('--output', help='产物目录，缺省取配置 [cli] output_dir')
    parser.add_argument('--env', help='配置环境名，缺省取 APP_ENV')
    parser.add_argument('--config-dir', dest='config_dir')
    parser.add_argument('--threads', type=int)
    parser.add_argument('--nodes', type=int, help='每个圆盘的配点数 M')
    parser.add_argument('--l-max', dest='l_max', type=float)
    parser.add_argument('--convention', choices=['oriented', 'unoriented'])
    parser.add_argument('--grid', help='re_min,re_max,n_re,im_min,im_max,n_im')
    parser.add_argument('--rect', help='re_min,re_max,im_min,im_max')
    parser.add_argument('--zmax', type=float)
    parser.add_argument('--z-points', dest='z_points', type=int)
    parser.add_argument('--k', type=int)
    parser.add_argument('--contour-side', dest='contour_side', choices=['upper', 'lower'])
    parser.add_argument('--contour-radius', dest='contour_radius', type=float)
    parser.add_argument('--m-half', dest='m_half', type=int)
    parser.add_argument('--T', dest='T', type=float)
    parser.add_argument('--samples', type=int)
    parser.add_argument('--paper-literal', '--literal-coefficients', dest='paper_literal', action='store_true',
                        help='同时输出逐字的 Weyl 多项式系数')
    parser.add_argument('--center', help='re,im')
    parser.add_argument('--radius', type=float)
    parser.add_argument('--input', help='renorm 的 x,u 两列 CSV')
    parser.add_argument('--exponents', help='逗号分隔的展开指数，如 -2,0')
    parser.add_argument('--log-depth', dest='log_depth', type=int)
    parser.add_argument('--weight', type=float)
    return parser


def load_settings(config: RunConfig) -> dict:
    """配置文件各节，再用命令行参数覆盖"""
    loader = ConfigLoader(env=config.env or os.environ.get('APP_ENV', 'local'), config_dir=str(config.config_dir))
    settings = loader.config
    if config.nodes is not None:
        settings['zeta']['nodes_per_disk'] = config.nodes
    if config.l_max is not None:
        settings['zeta']['l_max'] = config.l_max
    if config.contour_side is not None:
        settings['krein']['contour_side'] = config.contour_side
    if config.contour_radius is not None:
        settings['krein']['contour_radius'] = config.contour_radius
    return settings


def run(config: RunConfig) -> int:
    settings = load_settings(config)
    group = load_group_spec(config.group) if config.group is not None else None
    runner = SpectralRunner(config.model_dump(mode='json'), settings, group)
    runner.run()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    raw = {k: v for k, v in vars(args).items() if v is not None}
    try:
        config = RunConfig(**raw)
    except ValidationError as e:
        first = e.errors()[0]
        loc = '.'.join(str(x) for x in first.get('loc', ())) or 'config'
        logger.error(f'参数校验失败: {loc}: {first.get("msg")}')
        print(f'ValidationError:{loc}: {first.get("msg")}', file=sys.stderr)
        return 2
    try:
        return run(config)
    except GroupSpecError as e:
        logger.exception(e)
        print(f'{e} (field: {e.field})', file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        logger.exception(e)
        print(f'FileNotFoundError:{e}', file=sys.stderr)
        return 2
    except SpectralError as e:
        logger.exception(e)
        print(str(e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    logger.info("Application startup initiated.")
    sys.exit(main())
