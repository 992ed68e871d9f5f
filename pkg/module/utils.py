# module/utils.py
import json
import shutil
from pathlib import Path

import pandas as pd
from loguru import logger

_REGISTERED_SINKS = set()


def get_module_logger(log_name):
    """按模块名注册日志文件，重复调用不会重复添加 sink"""
    if log_name not in _REGISTERED_SINKS:
        logger.add(f"logs/module_{log_name}_{{time:YYYY-MM-DD}}.log",
                   level="INFO",
                   rotation="00:00",
                   filter=lambda record: record["extra"].get("name") == log_name,
                   enqueue=False,
                   buffering=1)
        _REGISTERED_SINKS.add(log_name)
    return logger.bind(name=log_name)


def config_header_lines(config: dict):
    """把运行配置写成 # 开头的注释行，保证产物可复现"""
    text = json.dumps(config, sort_keys=True, ensure_ascii=False, default=str)
    return [f'# config: {text}']


def write_csv(df: pd.DataFrame, path, config: dict):
    """CSV 输出：首部为配置注释行，浮点数用 %.17g"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        for line in config_header_lines(config):
            f.write(line + '\n')
        df.to_csv(f, index=False, float_format='%.17g', lineterminator='\n')
    return path


def read_csv(path):
    return pd.read_csv(path, comment='#')


def write_json(payload, path, config: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump({'config': config, 'result': payload}, f, ensure_ascii=False, indent=2, sort_keys=True)
    return path


def delete_path(path: Path):
    try:
        path = Path(path)
        if path.is_dir():
            shutil.rmtree(path)
        elif path.exists():
            path.unlink()
    except Exception:
        pass
