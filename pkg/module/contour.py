# module/contour.py
"""
积分路径模块：复平面折线路径，遇到极点时用半圆绕行
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, List, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad

from module.errors import ContourThroughPole, QuadratureFailure


class Side(str, Enum):
    """绕行方向：UPPER 为沿行进方向的左侧（实轴正向时即上半平面）"""
    UPPER = 'upper'
    LOWER = 'lower'


@dataclass(frozen=True)
class Segment:
    start: complex
    end: complex

    def point(self, s):
        return self.start + s * (self.end - self.start)

    def samples(self, n: int = 257) -> np.ndarray:
        return self.point(np.linspace(0.0, 1.0, n))


@dataclass(frozen=True)
class Arc:
    """z(θ) = center + radius·direction·e^{iθ}，θ 从 theta0 走到 theta1"""
    center: complex
    radius: float
    direction: complex
    theta0: float
    theta1: float

    def point(self, theta):
        return self.center + self.radius * self.direction * np.exp(1j * theta)

    @property
    def start(self) -> complex:
        return complex(self.point(self.theta0))

    @property
    def end(self) -> complex:
        return complex(self.point(self.theta1))

    def samples(self, n: int = 257) -> np.ndarray:
        return self.point(np.linspace(self.theta0, self.theta1, n))


Piece = Union[Segment, Arc]


def _quad_complex(func, a, b, epsabs, epsrel, limit):
    re, re_err = quad(lambda s: func(s).real, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit)
    im, im_err = quad(lambda s: func(s).imag, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit)
    return complex(re, im), math.hypot(re_err, im_err)


@dataclass(frozen=True)
class ContourPath:
    pieces: Tuple[Piece, ...]
    radius: float = 0.1
    side: Side = Side.UPPER
    poles: Tuple[complex, ...] = ()

    @property
    def start(self) -> complex:
        return complex(self.pieces[0].start)

    @property
    def end(self) -> complex:
        return complex(self.pieces[-1].end)

    @classmethod
    def polyline(cls, points: Sequence[complex], poles: Iterable[complex] = (),
                 radius: float = 0.1, side: Union[Side, str] = Side.UPPER) -> "ContourPath":
        """
        依次连接 points，距离直线不足 radius/2 的极点用半径 radius 的半圆绕开
        :param side: 半圆在行进方向左侧（UPPER）或右侧（LOWER）
        """
        side = Side(side)
        poles = tuple(complex(p) for p in poles)
        pieces: List[Piece] = []
        points = [complex(p) for p in points]
        for p, q in zip(points[:-1], points[1:]):
            pieces.extend(_detour_segment(p, q, poles, radius, side))
        path = cls(pieces=tuple(pieces), radius=radius, side=side, poles=poles)
        path.check()
        return path

    @classmethod
    def straight(cls, start: complex, end: complex, poles: Iterable[complex] = (),
                 radius: float = 0.1, side: Union[Side, str] = Side.UPPER) -> "ContourPath":
        return cls.polyline([start, end], poles, radius, side)

    def check(self):
        """路径与所有声明极点的距离必须 >= radius/2"""
        if not self.poles:
            return
        poles = np.array(self.poles)
        for piece in self.pieces:
            pts = piece.samples()
            dist = np.min(np.abs(pts[:, None] - poles[None, :]))
            if dist < self.radius / 2 - 1e-12:
                raise ContourThroughPole(f'路径距离极点仅 {dist:.3g}（要求 >= {self.radius / 2:.3g}）')

    def integrate(self, f: Callable[[complex], complex], epsabs: float = 1e-13,
                  epsrel: float = 1e-12, limit: int = 200) -> complex:
        total = 0j
        err_total = 0.0
        for piece in self.pieces:
            if isinstance(piece, Segment):
                dz = piece.end - piece.start
                if dz == 0:
                    continue
                value, err = _quad_complex(lambda s: complex(f(piece.point(s))) * dz, 0.0, 1.0,
                                           epsabs, epsrel, limit)
            else:
                value, err = _quad_complex(
                    lambda th: complex(f(complex(piece.point(th))))
                    * 1j * piece.radius * piece.direction * cmath.exp(1j * th),
                    piece.theta0, piece.theta1, epsabs, epsrel, limit)
            total += value
            err_total += err
        if not math.isfinite(err_total) or err_total > max(1e-8, 1e-8 * abs(total)):
            raise QuadratureFailure(f'路径积分误差估计过大: {err_total:.3g}', error_estimate=err_total)
        return total


def _detour_segment(p: complex, q: complex, poles: Sequence[complex], radius: float, side: Side) -> List[Piece]:
    length = abs(q - p)
    if length == 0:
        return []
    u = (q - p) / length
    hits = []
    for pole in poles:
        rel = (pole - p) * u.conjugate()
        s, h = rel.real, rel.imag
        if -radius / 2 < s < length + radius / 2 and abs(h) < radius / 2:
            if s < radius or s > length - radius:
                raise ContourThroughPole(f'极点 {pole} 距离路径端点太近，无法绕行', pole=pole)
            hits.append(s)
    hits.sort()
    for s1, s2 in zip(hits[:-1], hits[1:]):
        if s2 - s1 < 2 * radius:
            raise ContourThroughPole(f'相邻极点间距 {s2 - s1:.3g} 小于绕行直径 {2 * radius:.3g}')
    pieces: List[Piece] = []
    cursor = p
    for s in hits:
        center = p + s * u
        pieces.append(Segment(cursor, center - radius * u))
        if side == Side.UPPER:
            pieces.append(Arc(center, radius, u, math.pi, 0.0))
        else:
            pieces.append(Arc(center, radius, u, -math.pi, 0.0))
        cursor = center + radius * u
    pieces.append(Segment(cursor, q))
    return pieces
