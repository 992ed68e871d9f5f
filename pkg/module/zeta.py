# module/zeta.py
"""
Selberg zeta 模块：
1. Euler 乘积截断（收敛半平面 Re λ > δ 内）
2. Bowen-Series 转移算子的 Fredholm 行列式（延拓到整个复平面）
3. 辐角原理求零点、极限集维数 δ 的估计
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve, svdvals
from scipy.optimize import brentq

from module.errors import (
    BoundaryZero,
    BranchAmbiguity,
    BudgetExceeded,
    NoBracketing,
    NotConverged,
    OutsideConvergence,
    SpectralError,
    ZetaZero,
)
from module.schottky import (
    DEFAULT_BUDGET,
    Convention,
    GeodesicClass,
    SchottkyGroup,
    minimal_displacement,
    primitive_classes,
)
from module.mobius import apply_array
from module.utils import get_module_logger

zeta_logger = get_module_logger('zeta')

CONVERGENCE_MARGIN = 0.05
DEFAULT_NODES = 32
DELTA_NODES = 24
MAX_CYCLE_DEPTH = 12
CYCLE_WORDS = 200_000


class EulerMode(str, Enum):
    """CLASSES：按本原类逐项求和到 l_max；CYCLES：同一乘积按字长重组（循环展开）"""
    CLASSES = 'classes'
    CYCLES = 'cycles'


@dataclass(frozen=True)
class EulerConfig:
    """
    :param l_max: 测地线长度截断
    :param term_tol: m 求和的单项截断阈值
    :param delta: 已知的 δ，None 时按需估计
    :param depth: CYCLES 模式的最大字长，None 时按群的秩取
    """
    l_max: float = 30.0
    term_tol: float = 1e-16
    convention: Convention = Convention.ORIENTED
    budget: int = DEFAULT_BUDGET
    delta: Optional[float] = None
    threads: int = 1
    mode: EulerMode = EulerMode.CLASSES
    depth: Optional[int] = None

    def __post_init__(self):
        if not self.l_max > 0:
            raise SpectralError(f'l_max 必须为正: {self.l_max}')
        if not 0 < self.term_tol < 1:
            raise SpectralError(f'term_tol 必须在 (0, 1) 内: {self.term_tol}')
        object.__setattr__(self, 'convention', Convention(self.convention))
        object.__setattr__(self, 'mode', EulerMode(self.mode))
        if self.depth is not None and not 1 <= self.depth <= MAX_CYCLE_DEPTH:
            raise SpectralError(f'depth 必须在 [1, {MAX_CYCLE_DEPTH}] 内: {self.depth}')
        if self.mode == EulerMode.CYCLES and self.convention != Convention.ORIENTED:
            raise SpectralError('循环展开按字计数，只支持 oriented 约定')


@dataclass(frozen=True)
class EulerResult:
    value: complex
    tail_bound: float
    n_classes: int
    mode: EulerMode = EulerMode.CLASSES


@dataclass(frozen=True, eq=False)
class TransferOperator:
    group: SchottkyGroup
    nodes_per_disk: int
    lam: complex
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class FredholmReport:
    value: complex
    nodes_per_disk: int
    trailing_singular_value: float
    doubling_change: Optional[float] = None


@dataclass(frozen=True)
class Rect:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise SpectralError(f'非法矩形: {self}')

    @property
    def size(self) -> float:
        return max(self.re_max - self.re_min, self.im_max - self.im_min)

    @property
    def center(self) -> complex:
        return complex((self.re_min + self.re_max) / 2, (self.im_min + self.im_max) / 2)

    def corners(self) -> List[complex]:
        return [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.re_min - pad <= z.real <= self.re_max + pad
                and self.im_min - pad <= z.imag <= self.im_max + pad)

    def expanded(self, eps: float) -> "Rect":
        return Rect(self.re_min - eps, self.re_max + eps, self.im_min - eps, self.im_max + eps)

    def split(self, fraction: float = 0.5) -> Tuple["Rect", "Rect"]:
        if self.re_max - self.re_min >= self.im_max - self.im_min:
            mid = self.re_min + fraction * (self.re_max - self.re_min)
            return (Rect(self.re_min, mid, self.im_min, self.im_max),
                    Rect(mid, self.re_max, self.im_min, self.im_max))
        mid = self.im_min + fraction * (self.im_max - self.im_min)
        return (Rect(self.re_min, self.re_max, self.im_min, mid),
                Rect(self.re_min, self.re_max, mid, self.im_max))

    def as_dict(self) -> dict:
        return {'re_min': self.re_min, 're_max': self.re_max, 'im_min': self.im_min, 'im_max': self.im_max}


@dataclass(frozen=True)
class ZeroRecord:
    location: complex
    multiplicity: int
    box: Rect
    residual: float = 0.0
    refined: bool = True

    def as_dict(self) -> dict:
        return {'re': self.location.real, 'im': self.location.imag, 'multiplicity': self.multiplicity,
                'box': self.box.as_dict(), 'residual': self.residual, 'refined': self.refined}


# ------------------------------------------------------------------
# Euler 乘积
def _resolve_delta(group: SchottkyGroup, cfg: EulerConfig) -> float:
    return cfg.delta if cfg.delta is not None else estimate_delta(group)


def _check_convergence(group: SchottkyGroup, lam: complex, cfg: EulerConfig):
    delta = _resolve_delta(group, cfg)
    if not lam.real > delta + CONVERGENCE_MARGIN:
        raise OutsideConvergence(f'Re λ = {lam.real:.6g} 不大于 δ + {CONVERGENCE_MARGIN} = {delta + CONVERGENCE_MARGIN:.6g}')


def _classes(group: SchottkyGroup, cfg: EulerConfig) -> List[GeodesicClass]:
    return primitive_classes(group, cfg.l_max, cfg.convention, budget=cfg.budget, threads=cfg.threads)


def log_Z_euler(group: SchottkyGroup, lam, cfg: EulerConfig = EulerConfig()) -> complex:
    """log Z(λ) = -Σ_γ Σ_m (1/m) e^{-λ m l}/(1 - e^{-m l})"""
    return log_Z_euler_result(group, lam, cfg).value


def log_Z_euler_result(group: SchottkyGroup, lam, cfg: EulerConfig = EulerConfig()) -> EulerResult:
    lam = complex(lam)
    _check_convergence(group, lam, cfg)
    if cfg.mode == EulerMode.CYCLES:
        lengths = cycle_lengths(group, _cycle_depth(group, cfg), cfg.budget)
        coefficients, _ = _cycle_coefficients(lam, lengths, derivative=False)
        value = complex(sum(coefficients))
        if value == 0:
            raise ZetaZero(f'循环展开在 λ = {lam} 处为零')
        # 截断误差按最后一项估计（系数超指数衰减）
        tail = abs(coefficients[-1]) / abs(value)
        return EulerResult(value=cmath.log(value), tail_bound=tail,
                           n_classes=int(sum(len(x) for x in lengths)), mode=cfg.mode)
    classes = _classes(group, cfg)
    total = 0j
    for c in classes:
        m = 1
        while True:
            term = cmath.exp(-lam * m * c.length) / (m * (1.0 - math.exp(-m * c.length)))
            total += term
            if abs(term) < cfg.term_tol:
                break
            m += 1
    tail = euler_tail_bound(group, lam.real, cfg)
    return EulerResult(value=-total, tail_bound=tail, n_classes=len(classes))


def dlog_Z_euler(group: SchottkyGroup, lam, cfg: EulerConfig = EulerConfig()) -> complex:
    """Z'/Z(λ) = Σ_γ Σ_m l e^{-λ m l}/(1 - e^{-m l})"""
    lam = complex(lam)
    _check_convergence(group, lam, cfg)
    if cfg.mode == EulerMode.CYCLES:
        lengths = cycle_lengths(group, _cycle_depth(group, cfg), cfg.budget)
        coefficients, derivatives = _cycle_coefficients(lam, lengths, derivative=True)
        value = sum(coefficients)
        if value == 0:
            raise ZetaZero(f'循环展开在 λ = {lam} 处为零')
        return complex(sum(derivatives) / value)
    total = 0j
    for c in _classes(group, cfg):
        m = 1
        while True:
            term = c.length * cmath.exp(-lam * m * c.length) / (1.0 - math.exp(-m * c.length))
            total += term
            if abs(term) < cfg.term_tol:
                break
            m += 1
    return total


def _cycle_depth(group: SchottkyGroup, cfg: EulerConfig) -> int:
    if cfg.depth is not None:
        return cfg.depth
    letters = 2 * group.rank
    depth = 1
    while depth < MAX_CYCLE_DEPTH and letters * (letters - 1) ** depth <= CYCLE_WORDS:
        depth += 1
    return depth


@lru_cache(maxsize=16)
def cycle_lengths(group: SchottkyGroup, depth: int, budget: int = DEFAULT_BUDGET) -> Tuple[np.ndarray, ...]:
    """
    第 k 项：所有字长为 k 的循环约化字（每个轮换、幂都单独算）的平移长度
    tr L_λ^k = Σ e^{-λ l}/(1 - e^{-l})，求和对象正是这些字
    """
    letters = group.letters
    n_letters = len(letters)
    mats = np.array([group.element(a).matrix for a in letters])
    inv = np.array([letters.index(-a) for a in letters])
    allowed = np.ones((n_letters, n_letters), dtype=bool)
    allowed[np.arange(n_letters), inv] = False
    product, first, last = mats.copy(), np.arange(n_letters), np.arange(n_letters)
    out, visited = [], n_letters
    for k in range(1, depth + 1):
        if k > 1:
            rows, cols = np.nonzero(allowed[last])
            visited += len(rows)
            if visited > budget:
                raise BudgetExceeded(f'循环展开的字数超过预算 {budget}', frontier=len(rows))
            product = product[rows] @ mats[cols]
            first, last = first[rows], cols
        closed = np.ones(len(last), dtype=bool) if k == 1 else last != inv[first]
        trace = np.abs(product[closed, 0, 0] + product[closed, 1, 1])
        out.append(2.0 * np.arccosh(trace / 2.0))
    zeta_logger.info(f'循环展开的字枚举完成: rank={group.rank}, depth={depth}, 字数={sum(len(x) for x in out)}')
    return tuple(out)


def _cycle_coefficients(lam: complex, lengths: Tuple[np.ndarray, ...], derivative: bool):
    """
    det(I - xL) = Σ c_n x^n，n c_n = -Σ_{k=1}^{n} tr(L^k) c_{n-k}；x = 1 处截断到 depth
    derivative 为 True 时同时返回 dc_n/dλ
    """
    traces, dtraces = [], []
    for ls in lengths:
        w = np.exp(-lam * ls) / (1.0 - np.exp(-ls))
        traces.append(complex(w.sum()))
        if derivative:
            dtraces.append(complex(-(ls * w).sum()))
    c, dc = [1.0 + 0j], [0j]
    for n in range(1, len(lengths) + 1):
        c.append(-sum(traces[k - 1] * c[n - k] for k in range(1, n + 1)) / n)
        if derivative:
            dc.append(-sum(dtraces[k - 1] * c[n - k] + traces[k - 1] * dc[n - k] for k in range(1, n + 1)) / n)
    return c, dc


def log_Z_product(group: SchottkyGroup, lam, cfg: EulerConfig = EulerConfig()) -> complex:
    """log Z(λ) = Σ_γ Σ_k log(1 - e^{-(λ+k) l})"""
    lam = complex(lam)
    _check_convergence(group, lam, cfg)
    total = 0j
    for c in _classes(group, cfg):
        k = 0
        while True:
            w = cmath.exp(-(lam + k) * c.length)
            total += cmath.log(1.0 - w)
            if abs(w) < cfg.term_tol:
                break
            k += 1
    return total


def euler_tail_bound(group: SchottkyGroup, sigma: float, cfg: EulerConfig = EulerConfig(),
                     derivative: bool = False) -> float:
    """
    未枚举类（长度 > l_max）贡献的上界：
    字长为 k 的本原类不超过 2r(2r-1)^{k-1}/k 个，长度 >= max(l_max, k·d_min)
    """
    d_min = minimal_displacement(group)
    r = group.rank
    growth = (2 * r - 1) * math.exp(-sigma * d_min)
    if growth >= 1.0 or sigma <= 0:
        return math.inf
    bound = 0.0
    k = 1
    while True:
        length = max(cfg.l_max, k * d_min)
        # 计数在对数下累加，避免 (2r-1)^k 溢出
        log_term = math.log(2 * r) + (k - 1) * math.log(2 * r - 1) - math.log(k) - sigma * length
        term = math.exp(log_term) / ((1 - math.exp(-sigma * length)) * (1 - math.exp(-length)))
        if derivative:
            term *= length
        bound += term
        if k * d_min > cfg.l_max and term < 1e-30 * max(bound, 1e-300):
            break
        if k > 100000:
            return math.inf
        k += 1
    return bound


# ------------------------------------------------------------------
# 转移算子
@dataclass(frozen=True, eq=False)
class _Block:
    row: int
    col: int
    log_derivative: np.ndarray
    interpolation: np.ndarray


@lru_cache(maxsize=32)
def _collocation_blocks(group: SchottkyGroup, nodes_per_disk: int) -> Tuple[_Block, ...]:
    """
    节点取在各圆盘边界的等角点上，f 在 D_b 上用单位根重心插值表示
    块 (a, b)（b ≠ -a）：z ∈ D_a 处取 f(g_b z) 与 log g_b'(z)
    """
    M = nodes_per_disk
    letters = group.letters
    omega = np.exp(2j * np.pi * np.arange(M) / M)
    blocks = []
    for row, a in enumerate(letters):
        disk_a = group.disk(a)
        z = disk_a.center + disk_a.radius * omega
        for col, b in enumerate(letters):
            if b == -a:
                continue
            g = group.element(b)
            disk_b = group.disk(b)
            # 每个块单独选分支：s(cz+d) 在 D_a 上实部为正
            mid = g.c * disk_a.center + g.d
            if abs(mid) <= abs(g.c) * disk_a.radius:
                raise BranchAmbiguity(f'字母 {b} 的 cz+d 在 D[{a}] 上取到 0')
            s = 1.0 if mid > 0 else -1.0
            shifted = s * (g.c * z + g.d)
            if np.min(shifted.real) <= 0:
                raise BranchAmbiguity(f'块 ({a},{b}) 上 cz+d 跨过负实轴')
            log_derivative = -2.0 * np.log(shifted)
            u = (apply_array(g, z) - disk_b.center) / disk_b.radius
            if np.max(np.abs(u)) >= 1.0:
                raise SpectralError(f'g[{b}](D[{a}]) 不在 D[{b}] 内，群不是 Schottky 的')
            interpolation = omega[None, :] * (u[:, None] ** M - 1.0) / (M * (u[:, None] - omega[None, :]))
            blocks.append(_Block(row, col, log_derivative, interpolation))
    zeta_logger.info(f'转移算子配点完成: rank={group.rank}, M={M}, 块数={len(blocks)}')
    return tuple(blocks)


def transfer_matrix(group: SchottkyGroup, lam, nodes_per_disk: int = DEFAULT_NODES) -> TransferOperator:
    """(L_λ f)(z) = Σ_{b ≠ -a} (g_b'(z))^λ f(g_b z)，z ∈ D_a"""
    if nodes_per_disk < 4:
        raise SpectralError(f'每个圆盘至少 4 个节点: {nodes_per_disk}')
    lam = complex(lam)
    M = nodes_per_disk
    n_letters = 2 * group.rank
    matrix = np.zeros((n_letters * M, n_letters * M), dtype=complex)
    for block in _collocation_blocks(group, M):
        weight = np.exp(lam * block.log_derivative)
        matrix[block.row * M:(block.row + 1) * M, block.col * M:(block.col + 1) * M] = \
            weight[:, None] * block.interpolation
    if not np.all(np.isfinite(matrix)):
        raise SpectralError(f'λ = {lam} 处转移矩阵含非有限值')
    return TransferOperator(group=group, nodes_per_disk=M, lam=lam, matrix=matrix)


def _det_lu(a: np.ndarray) -> complex:
    lu, piv = lu_factor(a, check_finite=False)
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    value = complex(np.prod(np.diag(lu)))
    return -value if swaps % 2 else value


def fredholm_det(group: SchottkyGroup, lam, nodes_per_disk: int = DEFAULT_NODES,
                 tol: Optional[float] = None) -> complex:
    """
    det(I - L_λ)，即 Z(λ)
    :param tol: 给定时把 M 加倍复核，变化超过 tol 抛 NotConverged
    """
    op = transfer_matrix(group, lam, nodes_per_disk)
    value = _det_lu(np.eye(op.size) - op.matrix)
    if tol is not None:
        finer = fredholm_det(group, lam, 2 * nodes_per_disk)
        change = abs(finer - value)
        if change > tol * max(1.0, abs(finer)):
            raise NotConverged(f'M 从 {nodes_per_disk} 加倍后变化 {change:.3g} 超过容差 {tol:.3g}')
    return value


def fredholm_report(group: SchottkyGroup, lam, nodes_per_disk: int = DEFAULT_NODES) -> FredholmReport:
    op = transfer_matrix(group, lam, nodes_per_disk)
    value = _det_lu(np.eye(op.size) - op.matrix)
    singular = svdvals(op.matrix)
    finer = fredholm_det(group, lam, 2 * nodes_per_disk)
    report = FredholmReport(value=value, nodes_per_disk=nodes_per_disk,
                            trailing_singular_value=float(singular[-1]),
                            doubling_change=float(abs(finer - value)))
    if report.trailing_singular_value > 1e-14:
        zeta_logger.warning(f'λ={lam}: 末位奇异值 {report.trailing_singular_value:.3g} 未低于 1e-14，M 可能不足')
    return report


def dlog_Z_fredholm(group: SchottkyGroup, lam, nodes_per_disk: int = DEFAULT_NODES) -> complex:
    """
    Z'/Z(λ) = -tr((I - L_λ)^{-1} ∂_λ L_λ)
    每个块的权重是 exp(λ·log g_b')，所以 ∂_λ L 就是逐行乘上 log g_b'
    """
    lam = complex(lam)
    op = transfer_matrix(group, lam, nodes_per_disk)
    M = nodes_per_disk
    deriv = np.zeros_like(op.matrix)
    for block in _collocation_blocks(group, M):
        rows = slice(block.row * M, (block.row + 1) * M)
        cols = slice(block.col * M, (block.col + 1) * M)
        deriv[rows, cols] = block.log_derivative[:, None] * op.matrix[rows, cols]
    lu, piv = lu_factor(np.eye(op.size) - op.matrix, check_finite=False)
    if np.min(np.abs(np.diag(lu))) == 0:
        raise ZetaZero(f'λ = {lam} 处 det(I - L) = 0')
    solved = lu_solve((lu, piv), deriv, check_finite=False)
    value = -complex(np.trace(solved))
    if not cmath.isfinite(value):
        raise ZetaZero(f'λ = {lam} 处 Z\'/Z 不是有限值')
    return value


def leading_eigenvalue(group: SchottkyGroup, s: float, nodes_per_disk: int = DELTA_NODES) -> float:
    """实参数 s 下转移算子的 Perron 根"""
    op = transfer_matrix(group, float(s), nodes_per_disk)
    eig = np.linalg.eigvals(op.matrix)
    lead = eig[np.argmax(np.abs(eig))]
    if lead.real <= 0 or abs(lead.imag) > 1e-8 * abs(lead):
        raise SpectralError(f's = {s} 处主特征值 {lead} 不是正实数')
    return float(lead.real)


@lru_cache(maxsize=64)
def estimate_delta(group: SchottkyGroup, tol: float = 1e-10, nodes_per_disk: int = DELTA_NODES) -> float:
    """
    δ：主特征值在 s = δ 处等于 1（对 s 二分）
    """
    if tol < 1e-10:
        raise SpectralError(f'tol 不能小于 1e-10: {tol}')

    def f(s):
        return math.log(leading_eigenvalue(group, s, nodes_per_disk))

    f0 = f(0.0)
    if f0 <= 1e-9:
        # 极限集只有两点（初等群）
        zeta_logger.info(f'δ 估计: 主特征值在 s=0 处为 {math.exp(f0):.12g}，δ = 0')
        return 0.0
    f1 = f(1.0)
    if f1 >= 0:
        raise NoBracketing(f'主特征值在 (0, 1) 上没有穿过 1: f(0)={f0:.3g}, f(1)={f1:.3g}')
    delta = brentq(f, 0.0, 1.0, xtol=tol, maxiter=200)
    zeta_logger.info(f'δ 估计完成: δ = {delta:.12g} (rank={group.rank}, M={nodes_per_disk})')
    return float(delta)


# ------------------------------------------------------------------
# 辐角原理求零点
class _ZetaSampler:
    """缓存 det(I - L_λ) 的取值，矩形边界在子矩形之间复用"""

    def __init__(self, group: SchottkyGroup, nodes_per_disk: int):
        self.group = group
        self.nodes_per_disk = nodes_per_disk
        self.cache: Dict[complex, complex] = {}

    def __call__(self, lam: complex) -> complex:
        lam = complex(round(lam.real, 14), round(lam.imag, 14))
        if lam not in self.cache:
            self.cache[lam] = fredholm_det(self.group, lam, self.nodes_per_disk)
        return self.cache[lam]


def _edge_phase(f, a: complex, b: complex, base_points: int, max_depth: int, near_zero: float):
    """沿边 a→b 累积辐角变化，相邻两点辐角差超过 π/4 时加密"""
    total = 0.0
    min_abs = math.inf
    ts = np.linspace(0.0, 1.0, base_points + 1)
    for t0, t1 in zip(ts[:-1], ts[1:]):
        stack = [(t0, t1, 0)]
        while stack:
            s0, s1, depth = stack.pop()
            f0, f1 = f(a + s0 * (b - a)), f(a + s1 * (b - a))
            min_abs = min(min_abs, abs(f0), abs(f1))
            if f0 == 0 or f1 == 0:
                return total, 0.0, False
            step = cmath.phase(f1 / f0)
            if abs(step) > math.pi / 4:
                if depth >= max_depth:
                    return total, min_abs, False
                mid = (s0 + s1) / 2
                # 先处理前半段，保持累积顺序
                stack.append((mid, s1, depth + 1))
                stack.append((s0, mid, depth + 1))
                continue
            total += step
    return total, min_abs, min_abs > near_zero


def winding_number(f, rect: Rect, base_points: int = 32, max_depth: int = 16,
                   near_zero: float = 1e-12) -> Tuple[int, float, bool]:
    """返回 (绕数, 原始辐角和/2π, 边界是否安全)"""
    corners = rect.corners()
    total = 0.0
    safe = True
    for a, b in zip(corners, corners[1:] + corners[:1]):
        phase, _, ok = _edge_phase(f, a, b, base_points, max_depth, near_zero)
        total += phase
        safe = safe and ok
    raw = total / (2 * math.pi)
    return int(round(raw)), raw, safe and abs(raw - round(raw)) < 1e-6


def _safe_winding(f, rect: Rect, max_perturb: int = 6) -> Tuple[int, Rect]:
    eps = 1e-3 * rect.size
    current = rect
    for attempt in range(max_perturb + 1):
        count, raw, safe = winding_number(f, current)
        if safe:
            return count, current
        zeta_logger.warning(f'矩形 {current} 边界接近零点（raw={raw:.6g}），第 {attempt + 1} 次外扩')
        current = current.expanded(eps * (attempt + 1))
    raise BoundaryZero(f'零点距离矩形 {rect} 边界过近，扰动后仍无法避开')


def _newton(f, z0: complex, multiplicity: int, step: float = 1e-7, max_iter: int = 80) -> complex:
    """
    带重数的 Newton 迭代，返回 |f| 最小的迭代点
    不按 |f| 停：重零点附近 |f| 下降得比位置误差快得多
    """
    z = z0
    best, best_abs = z0, math.inf
    for _ in range(max_iter):
        fz = f(z)
        if abs(fz) < best_abs:
            best, best_abs = z, abs(fz)
        if fz == 0:
            break
        deriv = (f(z + step) - f(z - step)) / (2 * step)
        if deriv == 0:
            break
        delta = multiplicity * fz / deriv
        z = z - delta
        if abs(delta) <= 1e-13 * max(1.0, abs(z)):
            if abs(f(z)) < best_abs:
                best = z
            break
    return best


def find_zeros(group: SchottkyGroup, rect: Rect, nodes_per_disk: int = DEFAULT_NODES,
               tol: float = 1e-10, split_size: float = 0.05, cluster_size: float = 1e-4) -> List[ZeroRecord]:
    """
    矩形内 det(I - L_λ) 的全部零点及重数，总数等于 ∂rect 上的绕数
    """
    sampler = _ZetaSampler(group, nodes_per_disk)

    def direct(lam):
        return fredholm_det(group, lam, nodes_per_disk)

    records: List[ZeroRecord] = []
    total, rect = _safe_winding(sampler, rect)
    zeta_logger.info(f'矩形 {rect} 内零点总重数 {total}')
    pending = [(rect, total)]
    while pending:
        box, count = pending.pop()
        if count == 0:
            continue
        if (count == 1 and box.size <= split_size) or box.size <= cluster_size:
            z = _newton(direct, box.center, count)
            if not box.contains(z, pad=box.size):
                zeta_logger.warning(f'Newton 迭代离开矩形 {box}，取矩形中心')
                z = box.center
            residual = abs(direct(z))
            if residual >= tol:
                # 缩小差分步长重新迭代一次
                retry = _newton(direct, z, count, step=1e-9, max_iter=160)
                if box.contains(retry, pad=box.size) and abs(direct(retry)) < residual:
                    z, residual = retry, abs(direct(retry))
            refined = residual < tol
            if not refined:
                zeta_logger.warning(f'零点 {z} 处 |det| = {residual:.3g} 未达到 {tol:.3g}，记录标记为未精化')
            records.append(ZeroRecord(location=z, multiplicity=count, box=box, residual=residual, refined=refined))
            continue
        # 不从正中分割：对称矩形的中线常常正好穿过零点
        for fraction in (0.47, 0.53, 0.41, 0.59, 0.5):
            left, right = box.split(fraction)
            try:
                c1, _ = _safe_winding(sampler, left, max_perturb=0)
                c2, _ = _safe_winding(sampler, right, max_perturb=0)
            except BoundaryZero:
                continue
            if c1 + c2 == count:
                pending.extend([(right, c2), (left, c1)])
                break
        else:
            raise BoundaryZero(f'矩形 {box} 无法分割成边界安全的子矩形')
    records = _merge_records(records, cluster_size)
    zeta_logger.info(f'求零点完成: 共 {len(records)} 个零点')
    return records


def _merge_records(records: List[ZeroRecord], tol: float) -> List[ZeroRecord]:
    """分割线恰好经过零点时，同一个零点会在相邻子矩形里各记一次"""
    merged: List[ZeroRecord] = []
    for rec in sorted(records, key=lambda r: (r.location.imag, r.location.real)):
        for i, other in enumerate(merged):
            if abs(other.location - rec.location) <= tol:
                total = other.multiplicity + rec.multiplicity
                location = (other.location * other.multiplicity + rec.location * rec.multiplicity) / total
                merged[i] = ZeroRecord(location=location, multiplicity=total, box=other.box,
                                       residual=max(other.residual, rec.residual),
                                       refined=other.refined and rec.refined)
                break
        else:
            merged.append(rec)
    merged.sort(key=lambda r: (r.location.imag, r.location.real))
    return merged
