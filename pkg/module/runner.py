# module/runner.py
"""
批处理编排模块：按子命令调度各数值模块，产物写到输出目录（CSV/JSON，首部带配置）
"""
from __future__ import annotations

import cmath
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from module.contour import Side
from module.errors import SpectralError
from module.krein import (
    KreinEvaluator,
    det_Pk_result,
    det_SX_functional,
    divisor_at,
    pk_contour,
    prefetch_dxi,
    verify_m_half,
    weyl_check,
    weyl_prediction,
    xi_grid,
    z_ratio,
)
from module.renorm import SampledBoundaryFunction, finite_part
from module.schottky import Convention, SchottkyGroup, primitive_classes, spectrum_table
from module.specialfn import integral_L
from module.utils import delete_path, get_module_logger, read_csv, write_csv, write_json
from module.zeta import (
    EulerConfig,
    Rect,
    estimate_delta,
    find_zeros,
    fredholm_det,
    log_Z_euler_result,
)

runner_logger = get_module_logger('runner')

# 只影响调度或存放位置的参数不写进产物首部，保证不同线程数下输出逐字节一致
UNRECORDED_KEYS = {'threads', 'output', 'group', 'config_dir'}


def parse_floats(text: str, count: Optional[int] = None) -> List[float]:
    values = [float(x) for x in text.split(',') if x.strip()]
    if count is not None and len(values) != count:
        raise ValueError(f'需要 {count} 个逗号分隔的数，收到 "{text}"')
    return values


class SpectralRunner:
    """各子命令共享同一个群、配置与 Krein 求值器"""

    def __init__(self, run_config: Dict[str, Any], settings: Dict[str, Dict[str, Any]],
                 group: Optional[SchottkyGroup] = None):
        """
        :param run_config: 命令行参数（RunConfig.model_dump）
        :param settings: ConfigLoader 各节配置，已合并命令行覆盖
        :param group: renorm 子命令不需要群
        """
        self.run_config = run_config
        self.settings = settings
        self.group = group
        self.threads = int(run_config.get('threads') or settings['cli']['threads'])
        self.output_dir = Path(run_config.get('output') or settings['cli']['output_dir'])
        self._delta: Optional[float] = None
        self._evaluator: Optional[KreinEvaluator] = None
        self.artifacts: List[Path] = []

    # ------------------------------------------------------------------
    @property
    def header_config(self) -> Dict[str, Any]:
        run = {k: v for k, v in self.run_config.items() if k not in UNRECORDED_KEYS}
        return {'run': run, 'settings': self.settings}

    @property
    def zeta_cfg(self) -> Dict[str, Any]:
        return self.settings['zeta']

    @property
    def delta(self) -> float:
        if self._delta is None:
            self._delta = estimate_delta(self.group, self.zeta_cfg['delta_tol'], self.zeta_cfg['delta_nodes'])
        return self._delta

    def euler_config(self) -> EulerConfig:
        return EulerConfig(l_max=self.zeta_cfg['l_max'], term_tol=self.zeta_cfg['term_tol'],
                           convention=Convention(self.settings['schottky']['convention']),
                           budget=self.settings['schottky']['enumeration_budget'],
                           delta=self.delta, threads=self.threads, mode=self.zeta_cfg['euler_mode'],
                           depth=self.zeta_cfg['cycle_depth'] or None)

    @property
    def evaluator(self) -> KreinEvaluator:
        if self._evaluator is None:
            k = self.settings['krein']
            self._evaluator = KreinEvaluator(
                group=self.group, delta=self.delta, route=k['route'],
                nodes_per_disk=self.zeta_cfg['nodes_per_disk'], quad_tol=k['quad_tol'],
                contour_radius=k['contour_radius'], contour_side=Side(k['contour_side']),
                m_half_threshold=k['m_half_threshold'], euler_cfg=self.euler_config())
        return self._evaluator

    def _map(self, func: Callable, items: Sequence) -> List:
        """保持输入顺序的并行映射"""
        if self.threads <= 1:
            return [func(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(func, items))

    def _path(self, name: str) -> Path:
        path = self.output_dir / name
        self.artifacts.append(path)
        return path

    def _csv(self, df: pd.DataFrame, name: str) -> Path:
        return write_csv(df, self._path(name), self.header_config)

    def _json(self, payload, name: str) -> Path:
        return write_json(payload, self._path(name), self.header_config)

    # ------------------------------------------------------------------
    def run(self) -> List[Path]:
        command = self.run_config['command']
        handler = getattr(self, f'cmd_{command}', None)
        if handler is None:
            raise SpectralError(f'未知子命令: {command}')
        start = time.time()
        runner_logger.info(f'子命令 {command} 开始: {self.run_config}')
        try:
            handler()
        except Exception:
            for path in self.artifacts:
                delete_path(path)
            runner_logger.error(f'子命令 {command} 失败，已删除部分产物 {[str(p) for p in self.artifacts]}')
            raise
        runner_logger.info(f'子命令 {command} 完成，耗时 {time.time() - start:.2f}s，产物 {[str(p) for p in self.artifacts]}')
        return self.artifacts

    def cmd_spectrum(self):
        convention = Convention(self.run_config.get('convention') or self.settings['schottky']['convention'])
        classes = primitive_classes(self.group, self.zeta_cfg['l_max'], convention,
                                    budget=self.settings['schottky']['enumeration_budget'], threads=self.threads)
        self._csv(spectrum_table(classes), 'spectrum.csv')

    def cmd_delta(self):
        self._json({'delta': self.delta, 'tol': self.zeta_cfg['delta_tol'], 'nodes_per_disk': self.zeta_cfg['delta_nodes'],
                    'rank': self.group.rank, 'chi': self.group.chi}, 'delta.json')
        print(f'{self.delta:.17g}')

    def _zeta_grid(self) -> List[complex]:
        grid = self.run_config.get('grid')
        if grid:
            re0, re1, n_re, im0, im1, n_im = parse_floats(grid, 6)
        else:
            re0, re1, n_re, im0, im1, n_im = self.delta + 0.2, self.delta + 2.0, 4, -5.0, 5.0, 5
        return [complex(x, y) for x in np.linspace(re0, re1, int(n_re)) for y in np.linspace(im0, im1, int(n_im))]

    def cmd_zeta(self):
        cfg = self.euler_config()
        M = self.zeta_cfg['nodes_per_disk']
        lams = self._zeta_grid()

        def evaluate(lam):
            det = fredholm_det(self.group, lam, M)
            rows = [{'re_lambda': lam.real, 'im_lambda': lam.imag, 're_logZ': cmath.log(det).real,
                     'im_logZ': cmath.log(det).imag, 'route': 'fredholm', 'tail_bound': 0.0,
                     'discrepancy': math.nan}]
            if lam.real > self.delta + 0.05:
                result = log_Z_euler_result(self.group, lam, cfg)
                log_z = result.value
                discrepancy = abs(cmath.exp(log_z) - det) / abs(det)
                rows[0]['discrepancy'] = discrepancy
                rows.append({'re_lambda': lam.real, 'im_lambda': lam.imag, 're_logZ': log_z.real,
                             'im_logZ': log_z.imag, 'route': 'euler',
                             'tail_bound': result.tail_bound, 'discrepancy': discrepancy})
            return rows

        rows = [row for chunk in self._map(evaluate, lams) for row in chunk]
        self._csv(pd.DataFrame(rows, columns=['re_lambda', 'im_lambda', 're_logZ', 'im_logZ', 'route',
                                              'tail_bound', 'discrepancy']), 'zeta.csv')

    def cmd_resonances(self):
        rect_text = self.run_config.get('rect')
        rect = Rect(*parse_floats(rect_text, 4)) if rect_text else Rect(-1.0, self.delta + 0.1, -5.0, 5.0)
        zeros = find_zeros(self.group, rect, self.zeta_cfg['nodes_per_disk'])
        self._json({'rect': rect.as_dict(), 'zeros': [z.as_dict() for z in zeros],
                    'total_multiplicity': sum(z.multiplicity for z in zeros)}, 'resonances.json')

    def _z_grid(self) -> np.ndarray:
        return np.linspace(0.0, float(self.run_config.get('zmax') or 10.0), int(self.run_config.get('z_points') or 41))

    def cmd_xi(self):
        ev = self.evaluator
        ts = self._z_grid()
        dxis = prefetch_dxi(ev, ts, self.threads)
        xis = xi_grid(ev, ts)
        df = pd.DataFrame({'t': ts, 'xi': xis, 'dxi': dxis, 'weyl_residual': xis - weyl_prediction(ev, ts)})
        self._csv(df, 'xi.csv')

    def cmd_dets(self):
        ev = self.evaluator
        m_half = verify_m_half(ev, self.run_config.get('m_half'))
        zs = self._z_grid()
        prefetch_dxi(ev, zs, self.threads)
        xis = xi_grid(ev, zs)
        rows = []
        for z, x in zip(zs, xis):
            phase = (-1) ** m_half * cmath.exp(-2j * math.pi * x)
            functional = det_SX_functional(ev, z)
            ratio = z_ratio(ev, z)
            residual = abs(ratio - phase * cmath.exp(-ev.sh_exponent * integral_L(ev.n, z))) / abs(ratio)
            rows.append({'z': z, 're_det_phase': phase.real, 'im_det_phase': phase.imag,
                         're_det_functional': functional.real, 'im_det_functional': functional.imag,
                         'route_diff': abs(phase - functional), 'fe_residual': residual})
        self._csv(pd.DataFrame(rows), 'dets.csv')

    def cmd_detpk(self):
        ev = self.evaluator
        k = int(self.run_config.get('k') or 1)
        contour = pk_contour(ev.n, k, ev.contour_radius, ev.contour_side)
        result = det_Pk_result(ev, k, contour)
        pieces = [{'kind': type(p).__name__, 'start': [complex(p.start).real, complex(p.start).imag],
                   'end': [complex(p.end).real, complex(p.end).imag]} for p in contour.pieces]
        self._json({**result.as_dict(), 'pieces': pieces, 'poles': [p.real for p in contour.poles]}, 'detpk.json')

    def cmd_weyl(self):
        ev = self.evaluator
        report = weyl_check(ev, T=float(self.run_config.get('T') or 20.0),
                            samples=int(self.run_config.get('samples') or 31),
                            literal=bool(self.run_config.get('paper_literal')))
        payload = report.as_dict()
        payload.update({'t': report.t.tolist(), 'xi': report.xi.tolist(), 'residual': report.residual.tolist()})
        self._json(payload, 'weyl.json')

    def cmd_divisor(self):
        ev = self.evaluator
        center = complex(*parse_floats(self.run_config.get('center') or '0,0.5', 2))
        record = divisor_at(ev, center, float(self.run_config.get('radius') or 0.2))
        self._json(record.as_dict(), 'divisor.json')

    def cmd_renorm(self):
        source = self.run_config.get('input')
        if not source:
            raise SpectralError('renorm 需要 --input 指定 x,u 两列的 CSV')
        df = read_csv(source)
        exponents = parse_floats(self.run_config.get('exponents') or '-2,0')
        sampled = SampledBoundaryFunction(x=df['x'].to_numpy(dtype=float), u=df['u'].to_numpy(dtype=float),
                                          exponents=tuple(exponents),
                                          log_depth=int(self.run_config.get('log_depth') or 0))
        result = finite_part(sampled, weight=float(self.run_config.get('weight') or 0.0),
                             window_fraction=self.settings['renorm']['window_fraction'])
        self._csv(pd.DataFrame([{'finite_part': result.value, 'log_coefficient': result.log_coefficient,
                                 'residual': result.residual}]), 'renorm.csv')
        print(f'{result.value:.17g} {result.log_coefficient:.17g}')
