# module/specialfn.py
"""
特殊函数模块（一般奇数 n）：复 log-gamma、L(t) 的两种形式、
det S_{H^{n+1}}、0-体积公式、Weyl 多项式系数 C_i
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional

import numpy as np
from scipy.special import loggamma

from module.contour import ContourPath, Side
from module.errors import PoleAt, SpectralError

POLE_TOL = 1e-14


class LRoute(str, Enum):
    GAMMA_QUOTIENT = 'gamma_quotient'
    POLYNOMIAL = 'polynomial'


@dataclass(frozen=True)
class OddDimension:
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1 or self.n % 2 == 0:
            raise SpectralError(f'n 必须是正奇数: {self.n}')

    @property
    def half(self) -> float:
        return self.n / 2


def _dim(n) -> OddDimension:
    return n if isinstance(n, OddDimension) else OddDimension(int(n))


def _nonpositive_integer(z: complex, tol: float = POLE_TOL) -> bool:
    z = complex(z)
    if abs(z.imag) > tol or z.real > tol:
        return False
    return abs(z.real - round(z.real)) <= tol


def log_gamma(z) -> complex:
    """log Γ(z)，z 为非正整数时抛 PoleAt"""
    z = complex(z)
    if _nonpositive_integer(z):
        raise PoleAt(f'Γ 在 z = {z} 处有极点', location=z)
    return complex(loggamma(z))


def big_L(n, t, route: LRoute = LRoute.GAMMA_QUOTIENT) -> complex:
    """
    L(t) = Γ(n/2+it)Γ(n/2-it) / (Γ(it)Γ(-it))
         = (1/4+t²)···((n/2-1)²+t²)·t·tanh(πt)
    """
    dim = _dim(n)
    t = complex(t)
    route = LRoute(route)
    if route == LRoute.GAMMA_QUOTIENT:
        half = dim.half
        for w in (half + 1j * t, half - 1j * t):
            if _nonpositive_integer(w):
                raise PoleAt(f'L(t) 在 t = {t} 处有极点', location=t)
        # 1/(Γ(it)Γ(-it)) 在 it ∈ -N0 处为零
        if _nonpositive_integer(1j * t) or _nonpositive_integer(-1j * t):
            return 0j
        return cmath.exp(log_gamma(half + 1j * t) + log_gamma(half - 1j * t)
                         - log_gamma(1j * t) - log_gamma(-1j * t))
    k = (t / 1j) - 0.5
    if abs(k - round(k.real)) <= POLE_TOL:
        raise PoleAt(f'tanh(πt) 在 t = {t} 处有极点', location=t)
    value = t * np.tanh(np.pi * t)
    for j in range(1, (dim.n - 1) // 2 + 1):
        value *= (dim.half - j) ** 2 + t * t
    return complex(value)


def l_poles(n, bound: float) -> List[complex]:
    """L(t) 的极点 ±i(n/2+k)，只列出模不超过 bound 的"""
    half = _dim(n).half
    poles = []
    k = 0
    while half + k <= bound:
        poles.extend([1j * (half + k), -1j * (half + k)])
        k += 1
    return poles


def default_contour(n, z, radius: float = 0.1, side: Side = Side.UPPER) -> ContourPath:
    z = complex(z)
    return ContourPath.straight(0j, z, poles=l_poles(n, abs(z) + 1.0), radius=radius, side=side)


def integral_L(n, z, contour: Optional[ContourPath] = None) -> complex:
    """∫_0^z L(t) dt 沿给定路径"""
    z = complex(z)
    if z == 0:
        return 0j
    if contour is None:
        contour = default_contour(n, z)
    if abs(contour.start) > 1e-14 or abs(contour.end - z) > 1e-12:
        raise SpectralError(f'路径端点应为 0 与 {z}，实际为 {contour.start} 与 {contour.end}')
    return contour.integrate(lambda t: big_L(n, t))


def det_SH(n, z, contour: Optional[ContourPath] = None) -> complex:
    """
    det S_{H^{n+1}}(n/2+iz) = exp(-2iπ(-1)^{(n+1)/2}/Γ(n+1) · ∫_0^z L(t)dt)
    """
    dim = _dim(n)
    sign = (-1) ** ((dim.n + 1) // 2)
    exponent = -2j * math.pi * sign / math.gamma(dim.n + 1) * integral_L(dim, z, contour)
    return cmath.exp(exponent)


def zero_volume(n, chi: int) -> float:
    """0-vol(X) = (-1)^{(n+1)/2} π^{n/2+1} χ / Γ(n/2+1)"""
    dim = _dim(n)
    sign = (-1) ** ((dim.n + 1) // 2)
    return sign * math.pi ** (dim.half + 1) * chi / math.gamma(dim.half + 1)


def kernel_prefactor(n) -> float:
    """π^{-n/2} Γ(n/2) / Γ(n)"""
    dim = _dim(n)
    return math.pi ** (-dim.half) * math.gamma(dim.half) / math.gamma(dim.n)


def weyl_leading_constant(n) -> float:
    """(4π)^{-(n+1)/2} / Γ((n+3)/2)，乘以 0-vol 即 ξ 的首项系数"""
    dim = _dim(n)
    return (4 * math.pi) ** (-(dim.n + 1) / 2) / math.gamma((dim.n + 3) / 2)


@dataclass(frozen=True)
class WeylPolynomial:
    """t^{n+1} + Σ C_i t^{2i}，coefficients: {i: C_i}"""
    n: int
    coefficients: Dict[int, Fraction]
    literal: bool = False

    @property
    def c_list(self) -> List[Fraction]:
        return [self.coefficients[i] for i in sorted(self.coefficients)]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        value = t ** (self.n + 1)
        for i, c in self.coefficients.items():
            value = value + float(c) * t ** (2 * i)
        return value


def weyl_polynomial(n, literal: bool = False) -> WeylPolynomial:
    """
    (n+1)·∫_0^t u Π_{j=1}^{(n-1)/2} ((n/2-j)² + u²) du 的展开
    literal=True 时用 (n/2 - j + u²) 因子
    """
    dim = _dim(n)
    half = Fraction(dim.n, 2)
    # 以 v = u² 为变量的多项式系数，低次在前
    poly = [Fraction(1)]
    for j in range(1, (dim.n - 1) // 2 + 1):
        const = (half - j) if literal else (half - j) ** 2
        nxt = [Fraction(0)] * (len(poly) + 1)
        for m, p in enumerate(poly):
            nxt[m] += p * const
            nxt[m + 1] += p
        poly = nxt
    # ∫_0^t u·v^m du = t^{2m+2}/(2m+2)
    coefficients = {}
    for m, p in enumerate(poly[:-1]):
        i = m + 1
        coefficients[i] = (dim.n + 1) * p / (2 * i)
    return WeylPolynomial(n=dim.n, coefficients=coefficients, literal=literal)
