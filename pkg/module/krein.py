# module/krein.py
"""
Krein 相位模块（n = 1）：
∂ξ 与 ξ、det S_X 的两条计算路线、det P_k、det S_X 的因子绕数、Weyl 渐近拟合
"""
from __future__ import annotations

import cmath
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from module.contour import ContourPath, Side
from module.errors import (
    InconsistentRoutes,
    NonIntegerWinding,
    PoleAt,
    QuadratureFailure,
    RouteUnavailable,
    SpectralError,
    ZetaZero,
)
from module.schottky import Convention, SchottkyGroup
from module.specialfn import (
    LRoute,
    big_L,
    default_contour,
    integral_L,
    kernel_prefactor,
    weyl_leading_constant,
    weyl_polynomial,
    zero_volume,
)
from module.utils import get_module_logger
from module.zeta import (
    CONVERGENCE_MARGIN,
    EulerConfig,
    EulerMode,
    Rect,
    dlog_Z_euler,
    dlog_Z_fredholm,
    estimate_delta,
    euler_tail_bound,
    fredholm_det,
    winding_number,
)

krein_logger = get_module_logger('krein')

EULER_MARGIN = 0.05
IMAG_TOL = 1e-9
ROUTE_AGREEMENT = 1e-5
WINDING_TOL = 1e-3


class ZetaRoute(str, Enum):
    """Z'/Z 的计算路线，AUTO 在 δ < n/2 - 0.05 时于 Euler 半平面内用 Euler 乘积，其余用 Fredholm"""
    FREDHOLM = 'fredholm'
    EULER = 'euler'
    AUTO = 'auto'


@dataclass
class KreinEvaluator:
    group: SchottkyGroup
    delta: float
    route: ZetaRoute = ZetaRoute.AUTO
    nodes_per_disk: int = 32
    quad_tol: float = 1e-9
    contour_radius: float = 0.1
    contour_side: Side = Side.UPPER
    m_half_threshold: float = 1e-8
    euler_cfg: EulerConfig = field(default_factory=lambda: EulerConfig(mode=EulerMode.CYCLES))
    n: int = 1
    _dlog_cache: Dict[complex, complex] = field(default_factory=dict, repr=False)
    _dxi_cache: Dict[float, float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n != 1:
            raise SpectralError(f'Krein 流程只支持 n = 1，收到 n = {self.n}')
        self.route = ZetaRoute(self.route)
        self.contour_side = Side(self.contour_side)
        if self.route == ZetaRoute.EULER and not self.euler_allowed:
            raise RouteUnavailable(f'δ = {self.delta:.6g} 不满足 δ < n/2 - {EULER_MARGIN}，临界线上 Euler 和发散')
        self.euler_cfg = EulerConfig(l_max=self.euler_cfg.l_max, term_tol=self.euler_cfg.term_tol,
                                     convention=Convention.ORIENTED, budget=self.euler_cfg.budget,
                                     delta=self.delta, threads=self.euler_cfg.threads,
                                     mode=self.euler_cfg.mode, depth=self.euler_cfg.depth)

    @classmethod
    def create(cls, group: SchottkyGroup, delta: Optional[float] = None, delta_tol: float = 1e-10,
               delta_nodes: int = 24, **kwargs) -> "KreinEvaluator":
        """δ 缺省时调用 estimate_delta"""
        if delta is None:
            delta = estimate_delta(group, delta_tol, delta_nodes)
        return cls(group=group, delta=delta, **kwargs)

    @property
    def chi(self) -> int:
        return self.group.chi

    @property
    def euler_allowed(self) -> bool:
        return self.delta < self.n / 2 - EULER_MARGIN

    @property
    def active_route(self) -> ZetaRoute:
        if self.route == ZetaRoute.AUTO:
            return ZetaRoute.EULER if self.euler_allowed else ZetaRoute.FREDHOLM
        return self.route

    def route_for(self, lam: complex) -> ZetaRoute:
        """AUTO 时 Euler 半平面以外（如复 z 的绕数圆周）退回 Fredholm；显式 EULER 则交给 Euler 路线报错"""
        route = self.active_route
        if route == ZetaRoute.EULER and self.route == ZetaRoute.AUTO \
                and not lam.real > self.delta + CONVERGENCE_MARGIN:
            return ZetaRoute.FREDHOLM
        return route

    def zeta(self, lam) -> complex:
        return fredholm_det(self.group, complex(lam), self.nodes_per_disk)

    def dlog_zeta(self, lam) -> complex:
        """Z'/Z(λ)，按 λ 缓存（值是确定的，并发写同一个键无妨）"""
        lam = complex(lam)
        cached = self._dlog_cache.get(lam)
        if cached is not None:
            return cached
        if self.route_for(lam) == ZetaRoute.EULER:
            value = dlog_Z_euler(self.group, lam, self.euler_cfg)
        else:
            value = dlog_Z_fredholm(self.group, lam, self.nodes_per_disk)
        self._dlog_cache[lam] = value
        return value

    def l_value(self, z) -> complex:
        return big_L(self.n, z, LRoute.POLYNOMIAL)

    @property
    def volume_term(self) -> float:
        """π^{-n/2}Γ(n/2)/Γ(n) · 0-vol(X)"""
        return kernel_prefactor(self.n) * zero_volume(self.n, self.chi)

    @property
    def sh_exponent(self) -> complex:
        """det S_X = Z(n/2-iz)/Z(n/2+iz) · exp(sh_exponent · ∫_0^z L)"""
        sign = (-1) ** ((self.n + 1) // 2)
        return -2j * math.pi * sign * self.chi / math.gamma(self.n + 1)


# ------------------------------------------------------------------
# ∂ξ 与 ξ
def dxi_raw(ev: KreinEvaluator, z: float) -> complex:
    """未丢弃虚部的 ∂ξ(z)"""
    half = ev.n / 2
    bracket = ev.dlog_zeta(half + 1j * z) + ev.dlog_zeta(half - 1j * z) + ev.volume_term * ev.l_value(z)
    return bracket / (2 * math.pi)


def dxi(ev: KreinEvaluator, z: float) -> float:
    """
    ∂ξ(z) = (1/2π)[Z'/Z(n/2+iz) + Z'/Z(n/2-iz) + π^{-n/2}Γ(n/2)/Γ(n)·L(z)·0-vol(X)]
    """
    z = float(z)
    cached = ev._dxi_cache.get(z)
    if cached is not None:
        return cached
    raw = dxi_raw(ev, z)
    if abs(raw.imag) > IMAG_TOL * max(1.0, abs(raw.real)):
        raise SpectralError(f'∂ξ({z}) 的虚部 {raw.imag:.3g} 超过 {IMAG_TOL}')
    ev._dxi_cache[z] = raw.real
    return raw.real


def prefetch_dxi(ev: KreinEvaluator, zs: Sequence[float], threads: int = 1) -> List[float]:
    """并行计算一组点上的 ∂ξ 并写入缓存"""
    zs = [float(z) for z in zs]
    if threads <= 1:
        return [dxi(ev, z) for z in zs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda z: dxi(ev, z), zs))


def _integrate_dxi(ev: KreinEvaluator, a: float, b: float) -> float:
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', IntegrationWarning)
        value, err = quad(lambda s: dxi(ev, s), a, b, epsabs=ev.quad_tol, epsrel=1e-10, limit=200)
    allowed = 10 * max(ev.quad_tol, 1e-10 * abs(value))
    if not math.isfinite(err) or err > allowed:
        raise QuadratureFailure(f'∫ ∂ξ 在 [{a}, {b}] 上误差估计 {err:.3g} 超过 {allowed:.3g}', error_estimate=err)
    return value


def xi(ev: KreinEvaluator, t: float) -> float:
    """ξ(t) = ∫_0^t ∂ξ，ξ(0) = 0"""
    t = float(t)
    if t == 0.0:
        return 0.0
    return _integrate_dxi(ev, 0.0, t)


def xi_grid(ev: KreinEvaluator, ts: Sequence[float]) -> np.ndarray:
    """逐段累积的 ξ，返回顺序与输入一致"""
    ts = np.asarray(ts, dtype=float)
    out = np.zeros_like(ts)
    for sign in (1.0, -1.0):
        idx = [i for i in np.argsort(sign * ts, kind='stable') if sign * ts[i] > 0]
        prev, acc = 0.0, 0.0
        for i in idx:
            acc += _integrate_dxi(ev, prev, float(ts[i]))
            prev = float(ts[i])
            out[i] = acc
    krein_logger.info(f'ξ 网格计算完成: {len(ts)} 个点，∂ξ 缓存 {len(ev._dxi_cache)} 项')
    return out


# ------------------------------------------------------------------
# det S_X
def z_ratio(ev: KreinEvaluator, z) -> complex:
    half = ev.n / 2
    denominator = ev.zeta(half + 1j * z)
    if abs(denominator) == 0:
        raise ZetaZero(f'Z(n/2 + iz) 在 z = {z} 处为零')
    return ev.zeta(half - 1j * z) / denominator


def _contour_for(ev: KreinEvaluator, z) -> ContourPath:
    return default_contour(ev.n, z, radius=ev.contour_radius, side=ev.contour_side)


def det_SX_functional(ev: KreinEvaluator, z, contour: Optional[ContourPath] = None) -> complex:
    """函数方程路线：det S_X(z) = Z(n/2-iz)/Z(n/2+iz) · exp(sh_exponent·∫_0^z L)"""
    z = complex(z)
    if contour is None and z != 0:
        contour = _contour_for(ev, z)
    return z_ratio(ev, z) * cmath.exp(ev.sh_exponent * integral_L(ev.n, z, contour))


def det_SX_phase(ev: KreinEvaluator, z: float, m_half: int) -> complex:
    """相位路线：det S_X(z) = (-1)^{m(n/2)} e^{-2iπξ(z)}，z 为实数"""
    return (-1) ** m_half * cmath.exp(-2j * math.pi * xi(ev, z))


def verify_m_half(ev: KreinEvaluator, m_half: Optional[int] = None) -> int:
    """
    m(n/2)：Z(n/2) 不为零时必须是 0，否则用小矩形上的绕数确定零点阶数
    """
    value = ev.zeta(ev.n / 2)
    if abs(value) > ev.m_half_threshold:
        if m_half not in (None, 0):
            raise SpectralError(f'|Z(n/2)| = {abs(value):.3g} 不为零，m(n/2) 只能是 0，收到 {m_half}')
        return 0
    eps = 1e-3
    box = Rect(ev.n / 2 - eps, ev.n / 2 + eps, -eps, eps)
    order, raw, safe = winding_number(ev.zeta, box)
    krein_logger.warning(f'|Z(n/2)| = {abs(value):.3g}，按绕数取 m(n/2) = {order}（raw={raw:.6g}）')
    if m_half is not None and m_half != order:
        raise SpectralError(f'提供的 m(n/2) = {m_half} 与绕数 {order} 不一致')
    return order


def det_SX(ev: KreinEvaluator, z, m_half: Optional[int] = None, check_routes: bool = True) -> complex:
    """
    实数 z 返回相位路线的值并与函数方程路线对照；复数 z 只走函数方程路线
    """
    z = complex(z)
    m_half = verify_m_half(ev, m_half)
    functional = det_SX_functional(ev, z)
    if z.imag != 0.0:
        return functional
    phase = det_SX_phase(ev, z.real, m_half)
    if check_routes:
        diff = abs(phase - functional)
        if diff > ROUTE_AGREEMENT:
            raise InconsistentRoutes(f'z = {z.real}: 相位路线与函数方程路线相差 {diff:.3g}')
        if diff > 1e-6:
            krein_logger.warning(f'z = {z.real}: 两条路线相差 {diff:.3g}，超过 1e-6')
    return phase


def phase_derivative(ev: KreinEvaluator, z: float, step: float = 1e-4) -> float:
    """arg det_SX 对 z 的中心差分，应等于 -2π∂ξ(z)"""
    plus = det_SX_functional(ev, z + step)
    minus = det_SX_functional(ev, z - step)
    return cmath.phase(plus / minus) / (2 * step)


# ------------------------------------------------------------------
# det P_k
def l_rotated_poles(n: int, bound: float) -> List[float]:
    """L(-it) 在实轴上的极点 ±(n/2 + j)"""
    poles = []
    p = n / 2
    while p <= bound:
        poles.extend([p, -p])
        p += 1
    return poles


def pk_contour(n: int, k: int, radius: float = 0.1, side=Side.UPPER) -> ContourPath:
    return ContourPath.straight(0j, complex(k), poles=l_rotated_poles(n, k + 1), radius=radius, side=side)


@dataclass(frozen=True)
class DetPkResult:
    value: complex
    k: int
    contour_side: str
    contour_radius: float
    exponent_integral: complex
    zeta_minus: complex
    zeta_plus: complex

    def as_dict(self) -> dict:
        return {'k': self.k, 're': self.value.real, 'im': self.value.imag,
                'contour_side': self.contour_side, 'contour_radius': self.contour_radius,
                're_integral': self.exponent_integral.real, 'im_integral': self.exponent_integral.imag,
                're_Z_minus': self.zeta_minus.real, 'im_Z_minus': self.zeta_minus.imag,
                're_Z_plus': self.zeta_plus.real, 'im_Z_plus': self.zeta_plus.imag}


def det_Pk_result(ev: KreinEvaluator, k: int, contour: Optional[ContourPath] = None) -> DetPkResult:
    """
    det P_k = Z(n/2-k)/Z(n/2+k) · exp(2π(-1)^{(n+3)/2}/Γ(n+1) · χ · ∫_0^k L(-it)dt)
    """
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise SpectralError(f'k 必须是正整数: {k}')
    n = ev.n
    if contour is None:
        contour = pk_contour(n, k, ev.contour_radius, ev.contour_side)
    if abs(contour.start) > 1e-14 or abs(contour.end - k) > 1e-12:
        raise SpectralError(f'det P_k 的路径应从 0 到 {k}')
    zeta_plus = ev.zeta(n / 2 + k)
    if abs(zeta_plus) <= ev.m_half_threshold:
        raise ZetaZero(f'Z(n/2 + {k}) = {zeta_plus} 为零，det P_{k} 无定义')
    zeta_minus = ev.zeta(n / 2 - k)
    integral = contour.integrate(lambda t: big_L(n, -1j * t, LRoute.POLYNOMIAL))
    sign = (-1) ** ((n + 3) // 2)
    value = zeta_minus / zeta_plus * cmath.exp(2 * math.pi * sign / math.gamma(n + 1) * ev.chi * integral)
    if abs(value.imag) > 1e-8 * max(1.0, abs(value.real)):
        krein_logger.warning(f'det P_{k} 的虚部 {value.imag:.3g} 超过 1e-8')
    krein_logger.info(f'det P_{k} = {value}（side={contour.side.value}, ρ={contour.radius}）')
    return DetPkResult(value=value, k=int(k), contour_side=contour.side.value, contour_radius=contour.radius,
                       exponent_integral=integral, zeta_minus=zeta_minus, zeta_plus=zeta_plus)


def det_Pk(ev: KreinEvaluator, k: int, contour: Optional[ContourPath] = None) -> complex:
    return det_Pk_result(ev, k, contour).value


# ------------------------------------------------------------------
# 因子绕数
@dataclass(frozen=True)
class DivisorRecord:
    center: complex
    radius: float
    winding: int
    raw: complex
    points: int

    @property
    def interpretation(self) -> str:
        """绕数 = -m(λ0) + m(n-λ0) 加上核维数修正"""
        if self.winding == 0:
            return 'regular'
        return 'zeros of Z(n/2+iz) dominate' if self.winding < 0 else 'zeros of Z(n/2-iz) or L poles dominate'

    def as_dict(self) -> dict:
        return {'re_center': self.center.real, 'im_center': self.center.imag, 'radius': self.radius,
                'winding': self.winding, 're_raw': self.raw.real, 'im_raw': self.raw.imag,
                'points': self.points}


def dlog_det_SX(ev: KreinEvaluator, z: complex) -> complex:
    """d/dz log det S_X = -i[Z'/Z(n/2-iz) + Z'/Z(n/2+iz)] + sh_exponent·L(z)"""
    half = ev.n / 2
    return (-1j * (ev.dlog_zeta(half - 1j * z) + ev.dlog_zeta(half + 1j * z))
            + ev.sh_exponent * ev.l_value(z))


def _circle_winding(ev: KreinEvaluator, center: complex, radius: float, points: int) -> complex:
    theta = 2 * np.pi * np.arange(points) / points
    total = 0j
    for th in theta:
        w = radius * cmath.exp(1j * th)
        total += dlog_det_SX(ev, center + w) * 1j * w
    return total * (2 * math.pi / points) / (2j * math.pi)


def divisor_at(ev: KreinEvaluator, center, radius: float, points: int = 64, max_points: int = 1024,
               nudges: int = 3) -> DivisorRecord:
    """
    (1/2πi)∮ d log det S_X，梯形公式，点数加倍直到稳定；圆周靠近奇点时放大半径
    """
    center = complex(center)
    r = float(radius)
    last_raw = None
    for attempt in range(nudges + 1):
        n_points = points
        try:
            prev = _circle_winding(ev, center, r, n_points)
            while n_points < max_points:
                n_points *= 2
                cur = _circle_winding(ev, center, r, n_points)
                if abs(cur - prev) < 1e-8:
                    prev = cur
                    break
                prev = cur
        except (ZetaZero, PoleAt, ZeroDivisionError) as e:
            krein_logger.warning(f'圆 |z-{center}|={r:.6g} 经过奇点: {e}，放大半径')
            r *= 1.1
            continue
        last_raw = prev
        winding = int(round(prev.real))
        if abs(prev - winding) <= WINDING_TOL:
            record = DivisorRecord(center=center, radius=r, winding=winding, raw=prev, points=n_points)
            krein_logger.info(f'因子绕数: center={center}, r={r:.6g}, winding={winding}, raw={prev}')
            return record
        krein_logger.warning(f'圆 |z-{center}|={r:.6g} 上的绕数 {prev} 不是整数，放大半径重试')
        r *= 1.1
    raise NonIntegerWinding(f'center={center} 的绕数积分 {last_raw} 离整数超过 {WINDING_TOL}')


# ------------------------------------------------------------------
# Weyl 渐近与增长检查
@dataclass(frozen=True)
class WeylReport:
    t: np.ndarray
    xi: np.ndarray
    residual: np.ndarray
    predicted_leading: float
    fitted_leading: float
    relative_error: float
    sup_residual_over_t: float
    linear_fit: tuple
    increasing: bool
    literal_coefficients: tuple = ()

    def as_dict(self) -> dict:
        return {'predicted_leading': self.predicted_leading, 'fitted_leading': self.fitted_leading,
                'relative_error': self.relative_error, 'sup_residual_over_t': self.sup_residual_over_t,
                'linear_fit_slope': self.linear_fit[0], 'linear_fit_intercept': self.linear_fit[1],
                'increasing': self.increasing,
                'literal_coefficients': [str(c) for c in self.literal_coefficients]}


def weyl_prediction(ev: KreinEvaluator, t) -> np.ndarray:
    """(4π)^{-(n+1)/2}/Γ((n+3)/2) · 0-vol · (t^{n+1} + Σ C_i t^{2i})"""
    poly = weyl_polynomial(ev.n)
    return weyl_leading_constant(ev.n) * zero_volume(ev.n, ev.chi) * poly(t)


def weyl_check(ev: KreinEvaluator, T: float = 20.0, samples: int = 31, t_min: float = 5.0,
               fit_from: float = 10.0, literal: bool = False) -> WeylReport:
    if not ev.delta < ev.n / 2:
        raise SpectralError(f'Weyl 渐近需要 δ < n/2，当前 δ = {ev.delta:.6g}')
    if T < 5:
        raise SpectralError(f'T 必须 >= 5: {T}')
    ts = np.linspace(t_min, T, samples)
    values = xi_grid(ev, ts)
    predicted = weyl_prediction(ev, ts)
    residual = values - predicted
    sup_ratio = float(np.max(np.abs(residual) / ts))
    linear = tuple(float(c) for c in np.polyfit(ts, residual, 1))
    mask = ts >= min(fit_from, T - 1)
    fitted = float(np.polyfit(ts[mask], values[mask], 2)[0])
    leading = weyl_leading_constant(ev.n) * zero_volume(ev.n, ev.chi)
    rel = abs(fitted - leading) / abs(leading) if leading else math.inf
    tail = ts[-max(3, samples // 5):]
    increasing = all(dxi(ev, t) > 0 for t in tail)
    literal_coeffs = tuple(weyl_polynomial(ev.n, literal=True).c_list) if literal else ()
    krein_logger.info(f'Weyl 拟合: 预测首项 {leading:.6g}，拟合 {fitted:.6g}，相对误差 {rel:.3g}，'
                      f'sup|r|/t = {sup_ratio:.6g}')
    return WeylReport(t=ts, xi=values, residual=residual, predicted_leading=leading, fitted_leading=fitted,
                      relative_error=rel, sup_residual_over_t=sup_ratio, linear_fit=linear,
                      increasing=increasing, literal_coefficients=literal_coeffs)


@dataclass(frozen=True)
class GrowthReport:
    z: np.ndarray
    deviation: np.ndarray
    bound: float
    passed: bool


def dxi_growth_check(ev: KreinEvaluator, zs: Sequence[float]) -> GrowthReport:
    """
    δ < 1/2 时 |∂ξ(z) + χL(z)| <= (1/π)Σ_γ Σ_m l e^{-ml/2}/(1-e^{-ml})（加上截断尾项）
    """
    if not ev.euler_allowed:
        raise RouteUnavailable(f'δ = {ev.delta:.6g}，临界线上的几何和不收敛')
    half = ev.n / 2
    series = dlog_Z_euler(ev.group, half, ev.euler_cfg).real
    # 循环展开给出的是整个级数，不再另加尾项
    tail = 0.0 if ev.euler_cfg.mode == EulerMode.CYCLES else euler_tail_bound(ev.group, half, ev.euler_cfg,
                                                                             derivative=True)
    bound = (series + tail) / math.pi
    zs = np.asarray(zs, dtype=float)
    deviation = np.array([abs(dxi(ev, z) + ev.chi * ev.l_value(z).real) for z in zs])
    passed = bool(np.all(deviation <= bound * (1 + 1e-9) + 1e-9))
    krein_logger.info(f'∂ξ 增长检查: max 偏差 {float(np.max(deviation)):.6g}，界 {bound:.6g}，passed={passed}')
    return GrowthReport(z=zs, deviation=deviation, bound=bound, passed=passed)
