# module/mobius.py
"""
Möbius 变换模块：上半平面等距变换（实 2x2 单位行列式矩阵）
群、闭测地线和长度都由这里的元素组合而成
"""
from __future__ import annotations

import math
import cmath
from dataclasses import InitVar, dataclass

import numpy as np

from module.errors import NotHyperbolic, FixesInfinity, SpectralError

DET_TOL = 1e-12
HYPERBOLIC_TOL = 1e-10
INFINITY = complex(math.inf, 0.0)


def is_infinity(z) -> bool:
    return cmath.isinf(z)


@dataclass(frozen=True)
class Disk:
    """边界实轴上的圆盘（Schottky 基本域数据）"""
    center: float
    radius: float

    def __post_init__(self):
        if not (self.radius > 0) or not math.isfinite(self.center) or not math.isfinite(self.radius):
            raise SpectralError(f'非法圆盘: center={self.center}, radius={self.radius}')

    def contains(self, z, tol: float = 0.0) -> bool:
        return abs(complex(z) - self.center) < self.radius - tol

    def gap(self, other: "Disk") -> float:
        """两个闭圆盘之间的距离，负数表示相交"""
        return abs(self.center - other.center) - self.radius - other.radius

    def boundary(self, n_points: int = 64, shrink: float = 1.0) -> np.ndarray:
        theta = 2.0 * np.pi * np.arange(n_points) / n_points
        return self.center + shrink * self.radius * np.exp(1j * theta)


@dataclass(frozen=True)
class MoebiusElement:
    a: float
    b: float
    c: float
    d: float
    normalize: InitVar[bool] = True

    def __post_init__(self, normalize: bool):
        # compose/inverse 的结果不归一化：长字的 ad-bc 严重抵消
        if not normalize:
            return
        det = self.a * self.d - self.b * self.c
        if not det > 0:
            raise SpectralError(f'矩阵行列式必须为正: det={det}')
        if abs(det - 1.0) > 0.0:
            s = 1.0 / math.sqrt(det)
            object.__setattr__(self, 'a', self.a * s)
            object.__setattr__(self, 'b', self.b * s)
            object.__setattr__(self, 'c', self.c * s)
            object.__setattr__(self, 'd', self.d * s)

    @classmethod
    def identity(cls) -> "MoebiusElement":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def diagonal(cls, length: float) -> "MoebiusElement":
        """diag(e^{l/2}, e^{-l/2})，平移长度为 l"""
        return cls(math.exp(length / 2), 0.0, 0.0, math.exp(-length / 2))

    @classmethod
    def from_matrix(cls, m) -> "MoebiusElement":
        m = np.asarray(m, dtype=float).reshape(2, 2)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def trace(self) -> float:
        return self.a + self.d

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def is_hyperbolic(self, tol: float = HYPERBOLIC_TOL) -> bool:
        return abs(self.trace) > 2.0 + tol

    def close_to(self, other: "MoebiusElement", tol: float = 1e-12) -> bool:
        """作为 PSL(2,R) 元素比较（±M 视为同一元素）"""
        m, o = self.matrix, other.matrix
        return bool(np.max(np.abs(m - o)) <= tol or np.max(np.abs(m + o)) <= tol)

    def __matmul__(self, other: "MoebiusElement") -> "MoebiusElement":
        return compose(self, other)

    def __call__(self, z):
        return apply(self, z)


def compose(g: MoebiusElement, h: MoebiusElement) -> MoebiusElement:
    return MoebiusElement(
        g.a * h.a + g.b * h.c,
        g.a * h.b + g.b * h.d,
        g.c * h.a + g.d * h.c,
        g.c * h.b + g.d * h.d,
        normalize=False,
    )


def inverse(g: MoebiusElement) -> MoebiusElement:
    return MoebiusElement(g.d, -g.b, -g.c, g.a, normalize=False)


def power(g: MoebiusElement, m: int) -> MoebiusElement:
    if m < 0:
        return power(inverse(g), -m)
    result = MoebiusElement.identity()
    base = g
    while m:
        if m & 1:
            result = compose(result, base)
        base = compose(base, base)
        m >>= 1
    return result


def translation_length(g: MoebiusElement) -> float:
    """l(γ) = 2 arccosh(|tr g| / 2)"""
    tr = abs(g.trace)
    if tr <= 2.0 + HYPERBOLIC_TOL:
        raise NotHyperbolic(f'|tr g| = {tr:.16g} 不大于 2，元素不是双曲的')
    return 2.0 * math.acosh(tr / 2.0)


def multiplier(g: MoebiusElement) -> float:
    """吸引不动点处的导数 e^{-l(γ)}，即 Poincaré 映射的特征值"""
    return math.exp(-translation_length(g))


def apply(g: MoebiusElement, z):
    """(az+b)/(cz+d)，无穷远点用 INFINITY 表示"""
    z = complex(z)
    if is_infinity(z):
        return INFINITY if g.c == 0.0 else complex(g.a / g.c)
    den = g.c * z + g.d
    if den == 0:
        return INFINITY
    return (g.a * z + g.b) / den


def apply_array(g: MoebiusElement, z: np.ndarray) -> np.ndarray:
    return (g.a * z + g.b) / (g.c * z + g.d)


def derivative(g: MoebiusElement, z):
    """g'(z) = 1/(cz+d)^2（单位行列式）"""
    return 1.0 / (g.c * z + g.d) ** 2


def isometric_disk(g: MoebiusElement) -> Disk:
    """|cz+d| <= 1 的圆盘：中心 -d/c，半径 1/|c|"""
    if abs(g.c) < 1e-12:
        raise FixesInfinity(f'c = {g.c:.3g}，元素固定无穷远点，没有等距圆')
    return Disk(center=-g.d / g.c, radius=1.0 / abs(g.c))


def fixed_points(g: MoebiusElement):
    """返回 (排斥不动点, 吸引不动点)，按实轴坐标"""
    if not g.is_hyperbolic():
        raise NotHyperbolic('只对双曲元素计算不动点')
    if abs(g.c) < 1e-14:
        # 轴的一端在无穷远
        other = g.b / (g.d - g.a)
        attracting_inf = abs(g.a) > abs(g.d)
        return (other, INFINITY) if attracting_inf else (INFINITY, other)
    disc = math.sqrt(g.trace ** 2 - 4.0)
    x1 = (g.a - g.d + disc) / (2 * g.c)
    x2 = (g.a - g.d - disc) / (2 * g.c)
    if abs(derivative(g, x1)) < 1.0:
        return x2, x1
    return x1, x2
