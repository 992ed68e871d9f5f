# module/config_loader.py
"""
配置模块：统一管理配置读取
"""
import os
import toml
from typing import Dict, Any, Optional
from pathlib import Path
from loguru import logger

DEFAULTS: Dict[str, Dict[str, Any]] = {
    'schottky': {'convention': 'oriented', 'enumeration_budget': 2_000_000},
    'zeta': {'nodes_per_disk': 32, 'l_max': 30.0, 'term_tol': 1e-16, 'delta_tol': 1e-10, 'delta_nodes': 24,
             'euler_mode': 'cycles', 'cycle_depth': 0},
    'krein': {'contour_radius': 0.1, 'contour_side': 'upper', 'quad_tol': 1e-9,
              'route': 'auto', 'm_half_threshold': 1e-8},
    'renorm': {'window_fraction': 0.125},
    'cli': {'threads': 1, 'output_dir': './out'},
}


class ConfigLoader:
    """配置加载器：负责读取和管理配置文件"""

    def __init__(self, env: Optional[str] = None, config_dir: str = './config'):
        """
        :param env: 环境名称，如 'local', 'test'。如果为None，从环境变量 APP_ENV 读取
        :param config_dir: 配置文件目录
        """
        if env is None:
            env = os.environ.get('APP_ENV', 'local')
        self.env = env
        self.config_path = Path(config_dir) / f'{env}.toml'
        self._config: Dict[str, Any] = {}
        self.load_config()

    def load_config(self):
        """加载配置文件"""
        if not self.config_path.exists():
            raise FileNotFoundError(f"配置文件不存在: {self.config_path}")
        self._config = toml.load(self.config_path)
        logger.info(f"已加载配置文件: {self.config_path}")

    def get(self, key: str, default: Any = None) -> Any:
        """获取配置值，支持点号分隔的嵌套key，如 'zeta.nodes_per_disk'"""
        keys = key.split('.')
        value = self._config
        for k in keys:
            if isinstance(value, dict):
                value = value.get(k)
                if value is None:
                    return default
            else:
                return default
        return value

    def _section(self, name: str) -> Dict[str, Any]:
        """配置文件中缺省的键用 DEFAULTS 补齐"""
        merged = dict(DEFAULTS[name])
        merged.update(self.get(name, {}) or {})
        return merged

    def get_schottky_config(self) -> Dict[str, Any]:
        """获取群构造与枚举配置"""
        return self._section('schottky')

    def get_zeta_config(self) -> Dict[str, Any]:
        """获取 zeta 函数配置"""
        return self._section('zeta')

    def get_krein_config(self) -> Dict[str, Any]:
        """获取 Krein 相位配置"""
        return self._section('krein')

    def get_renorm_config(self) -> Dict[str, Any]:
        """获取有限部分正则化配置"""
        return self._section('renorm')

    def get_cli_config(self) -> Dict[str, Any]:
        """获取命令行配置"""
        return self._section('cli')

    @property
    def config(self) -> Dict[str, Any]:
        """获取完整配置字典（已补齐缺省值）"""
        return {name: self._section(name) for name in DEFAULTS}
