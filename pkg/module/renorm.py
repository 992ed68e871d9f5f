# module/renorm.py
"""
有限部分正则化模块：带边界渐近展开的函数的重整化积分，漏斗与整个曲面的 0-体积
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import simpson

from module.errors import (
    FitResidualTooLarge,
    GradingMismatch,
    InconsistentRoutes,
    SpectralError,
    WindowTooSmall,
)
from module.schottky import SchottkyGroup
from module.specialfn import OddDimension, zero_volume
from module.utils import get_module_logger

renorm_logger = get_module_logger('renorm')

GRADING_TOL = 1e-12
SAMPLES_PER_UNKNOWN = 4


@dataclass(frozen=True)
class Term:
    """coefficient · x^exponent · (log x)^log_power"""
    exponent: complex
    log_power: int
    coefficient: complex

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.coefficient * x ** self.exponent * np.log(x) ** self.log_power


@dataclass(frozen=True)
class AsymptoticSeries:
    terms: Tuple[Term, ...] = ()
    remainder_order: Optional[float] = None

    def __post_init__(self):
        ordered = tuple(sorted(self.terms, key=lambda t: (complex(t.exponent).real, complex(t.exponent).imag,
                                                          t.log_power)))
        for t in ordered:
            if t.log_power < 0:
                raise SpectralError(f'log 次数不能为负: {t}')
            if not np.isfinite(complex(t.coefficient)):
                raise SpectralError(f'系数不是有限值: {t}')
        exps = []
        for t in ordered:
            e = complex(t.exponent)
            if exps and e == exps[-1]:
                continue
            if exps and not e.real > exps[-1].real:
                raise SpectralError(f'指数的实部必须严格递增: {exps[-1]} 与 {e}')
            exps.append(e)
        object.__setattr__(self, 'terms', ordered)

    @classmethod
    def from_dict(cls, coefficients: Dict[Tuple[complex, int], complex], remainder_order=None) -> "AsymptoticSeries":
        return cls(tuple(Term(complex(e), int(l), complex(c)) for (e, l), c in coefficients.items()),
                   remainder_order)

    @property
    def exponents(self) -> List[complex]:
        out = []
        for t in self.terms:
            if complex(t.exponent) not in out:
                out.append(complex(t.exponent))
        return out

    @property
    def log_depth(self) -> int:
        return max((t.log_power for t in self.terms), default=0)

    def coefficients(self) -> Dict[Tuple[complex, int], complex]:
        out: Dict[Tuple[complex, int], complex] = {}
        for t in self.terms:
            key = (complex(t.exponent), t.log_power)
            out[key] = out.get(key, 0j) + complex(t.coefficient)
        return out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x, dtype=complex)
        for t in self.terms:
            total = total + t(x)
        return total

    def __add__(self, other: "AsymptoticSeries") -> "AsymptoticSeries":
        merged = self.coefficients()
        for key, c in other.coefficients().items():
            merged[key] = merged.get(key, 0j) + c
        return AsymptoticSeries.from_dict(merged, self.remainder_order)


@dataclass(frozen=True)
class SingRegSplit:
    """sing: i = 0..n-1；critical: i = n（两边都不含）；reg: i > n"""
    sing: AsymptoticSeries
    critical: AsymptoticSeries
    reg: AsymptoticSeries

    def reconstruct(self) -> AsymptoticSeries:
        return self.sing + self.critical + self.reg


def split_sing_reg(series: AsymptoticSeries, n) -> SingRegSplit:
    """
    按 r^{-n-1+i}(log r)^l 的分级拆分
    """
    dim = n if isinstance(n, OddDimension) else OddDimension(int(n))
    base = -dim.n - 1
    groups: Dict[str, List[Term]] = {'sing': [], 'critical': [], 'reg': []}
    for t in series.terms:
        shift = complex(t.exponent) - base
        i = round(shift.real)
        if abs(shift.imag) > GRADING_TOL or abs(shift.real - i) > GRADING_TOL or i < 0:
            raise GradingMismatch(f'指数 {t.exponent} 不属于 r^(-{dim.n + 1}+i) 分级')
        key = 'sing' if i < dim.n else ('critical' if i == dim.n else 'reg')
        groups[key].append(t)
    return SingRegSplit(
        sing=AsymptoticSeries(tuple(groups['sing']), series.remainder_order),
        critical=AsymptoticSeries(tuple(groups['critical']), series.remainder_order),
        reg=AsymptoticSeries(tuple(groups['reg']), series.remainder_order),
    )


# ------------------------------------------------------------------
# 有限部分
@dataclass(frozen=True, eq=False)
class SampledBoundaryFunction:
    x: np.ndarray
    u: np.ndarray
    exponents: Tuple[complex, ...]
    log_depth: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        u = np.asarray(self.u)
        if x.ndim != 1 or x.shape != u.shape:
            raise SpectralError(f'x 与 u 的形状不一致: {x.shape} vs {u.shape}')
        if len(x) < 2 or np.any(x <= 0) or np.any(np.diff(x) <= 0):
            raise SpectralError('采样网格必须严格递增且 x > 0')
        if not self.exponents:
            raise SpectralError('至少需要声明一个展开指数')
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'exponents', tuple(sorted((complex(e) for e in self.exponents),
                                                           key=lambda e: (e.real, e.imag))))

    @property
    def x0(self) -> float:
        return float(self.x[-1])

    @property
    def shape(self) -> List[Tuple[complex, int]]:
        return [(e, l) for e in self.exponents for l in range(self.log_depth + 1)]


@dataclass(frozen=True)
class FiniteResult:
    value: float
    log_coefficient: float
    coefficients: Dict[Tuple[complex, int], complex] = field(default_factory=dict)
    residual: float = 0.0
    window: Tuple[float, float] = (0.0, 0.0)


def _antiderivative(q: complex, l: int, x: float) -> complex:
    """∫ x^q (log x)^l dx 在 x 处的值（不带常数）"""
    lx = math.log(x)
    if abs(q + 1) < GRADING_TOL:
        return lx ** (l + 1) / (l + 1)
    p = q + 1
    total = 0j
    for j in range(l + 1):
        total += (-1) ** j * math.factorial(l) / math.factorial(l - j) * lx ** (l - j) / p ** (j + 1)
    return x ** p * total


def finite_part(f: SampledBoundaryFunction, weight: float = 0.0, window_fraction: float = 0.125,
                residual_tol: float = 1e-8) -> FiniteResult:
    """
    FP_{ε→0} ∫_ε^{x0} x^weight u(x) dx 与 log(1/ε) 的系数
    小 x 窗口上加权最小二乘拟合展开系数，发散项解析扣除，余项数值积分
    """
    x = f.x
    g = x ** weight * f.u
    shape = [(e + weight, l) for e, l in f.shape]
    cut = f.x0 * window_fraction
    in_window = x <= cut
    if np.count_nonzero(in_window) < SAMPLES_PER_UNKNOWN * len(shape):
        raise WindowTooSmall(f'窗口 x <= {cut:.3g} 内只有 {np.count_nonzero(in_window)} 个样本，'
                             f'需要 {SAMPLES_PER_UNKNOWN * len(shape)} 个')
    xw, gw = x[in_window], g[in_window]
    lead = shape[0][0].real
    scale = xw ** (-lead)
    design = np.column_stack([xw ** q * np.log(xw) ** l for q, l in shape]) * scale[:, None]
    coeffs, *_ = np.linalg.lstsq(design, gw * scale, rcond=None)
    residual = float(np.max(np.abs(design @ coeffs - gw * scale)))
    lead_coeff = float(np.max(np.abs(coeffs)))
    if residual > residual_tol * max(lead_coeff, 1e-300):
        raise FitResidualTooLarge(f'展开拟合残差 {residual:.3g} 超过首项系数的 {residual_tol:.0e} 倍')
    fitted = {(q, l): complex(c) for (q, l), c in zip(shape, coeffs)}

    divergent = {k: c for k, c in fitted.items() if k[0].real <= -1 + GRADING_TOL}
    convergent = {k: c for k, c in fitted.items() if k not in divergent}
    x_min, x0 = float(x[0]), f.x0
    # 发散部分：有限部分就是原函数在 x0 处的值
    value = sum(c * _antiderivative(q, l, x0) for (q, l), c in divergent.items())
    remainder = g - sum(c * x ** q * np.log(x) ** l for (q, l), c in divergent.items())
    value += simpson(remainder, x=x)
    # [0, x_min] 上只剩收敛项
    value += sum(c * _antiderivative(q, l, x_min) for (q, l), c in convergent.items())
    log_coefficient = sum(c for (q, l), c in divergent.items() if abs(q + 1) < GRADING_TOL and l == 0)
    value = complex(value)
    log_coefficient = complex(log_coefficient)
    renorm_logger.info(f'有限部分: FP = {value.real:.15g}, log 系数 = {log_coefficient.real:.15g}, '
                       f'拟合残差 {residual:.3g}, 窗口 (0, {cut:.3g}]')
    return FiniteResult(value=value.real, log_coefficient=log_coefficient.real, coefficients=fitted,
                        residual=residual, window=(x_min, cut))


def sample_grid(x0: float, x_min: float = 1e-4, n_samples: int = 4001) -> np.ndarray:
    return np.geomspace(x_min, x0, n_samples)


def renormalized_integral(u: Callable, exponents: Sequence[complex], x0: float = 1.0, log_depth: int = 0,
                          weight: float = 0.0, x_min: float = 1e-4, n_samples: int = 4001,
                          window_fraction: float = 0.125) -> FiniteResult:
    """在几何网格上采样 u 后调用 finite_part"""
    x = sample_grid(x0, x_min, n_samples)
    sampled = SampledBoundaryFunction(x=x, u=np.asarray(u(x)), exponents=tuple(exponents), log_depth=log_depth)
    return finite_part(sampled, weight=weight, window_fraction=window_fraction)


# ------------------------------------------------------------------
# 0-体积
def funnel_zero_volume(length: float, n_samples: int = 4001, window_fraction: float = 0.125) -> float:
    """
    半柱面 dr² + cosh²r dθ²（θ 周长为 length）的重整化面积
    在 x = 2e^{-r} 下面积密度为 length·(x^{-2} + 1/4)，x ∈ (0, 2]
    """
    if not length > 0:
        raise SpectralError(f'漏斗边界长度必须为正: {length}')
    result = renormalized_integral(lambda x: length * (x ** -2.0 + 0.25), exponents=(-2.0, 0.0), x0=2.0,
                                   n_samples=n_samples, window_fraction=window_fraction)
    return result.value


def surface_zero_volume(group: SchottkyGroup, tol: float = 1e-6) -> float:
    """
    Gauss-Bonnet 给出凸核面积 -2πχ，加上各漏斗的有限部分，与 0-体积公式对照
    """
    core = -2.0 * math.pi * group.chi
    funnels = [funnel_zero_volume(length) for length in group.boundary_lengths]
    total = core + sum(funnels)
    expected = zero_volume(1, group.chi)
    if abs(total - expected) > tol * max(1.0, abs(expected)):
        raise InconsistentRoutes(f'0-体积两种算法不一致: Gauss-Bonnet {total:.12g} vs 公式 {expected:.12g}')
    renorm_logger.info(f'0-体积: χ={group.chi}, 凸核 {core:.12g}, 漏斗 {funnels}, 合计 {total:.12g}')
    return total
