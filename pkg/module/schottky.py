# module/schottky.py
"""
Schottky 群模块：构造与校验凸余紧 Schottky 群（三漏斗曲面等），
枚举本原闭测地线长度谱
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator
from scipy.optimize import brentq

from module.errors import BisectionFailure, BudgetExceeded, DiskOverlap, GroupSpecError, SpectralError
from module.mobius import (
    Disk,
    MoebiusElement,
    apply_array,
    compose,
    inverse,
    isometric_disk,
    translation_length,
)
from module.utils import get_module_logger

schottky_logger = get_module_logger('schottky')

DISK_GAP_TOL = 1e-9
BOUNDARY_TOL = 1e-9
CLUSTER_TOL = 1e-9
DEFAULT_BUDGET = 2_000_000
NESTED = 'nested'
SIDE_BY_SIDE = 'side_by_side'
SIDE_BY_SIDE_WIDTH = 1.0


class Convention(str, Enum):
    ORIENTED = 'oriented'
    UNORIENTED = 'unoriented'


@dataclass(frozen=True)
class SchottkyGroup:
    """
    generators[i] 对应字母 i+1，逆元对应 -(i+1)
    disks[letter] 为该字母所对应映射的像盘：g_a 把 D_{-a} 的外部映到 D_a 的内部
    """
    generators: Tuple[MoebiusElement, ...]
    disk_map: Tuple[Tuple[int, Disk], ...]
    boundary_lengths: Tuple[float, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def chi(self) -> int:
        return 1 - self.rank

    @property
    def letters(self) -> List[int]:
        out = []
        for i in range(1, self.rank + 1):
            out.extend([i, -i])
        return out

    def disk(self, letter: int) -> Disk:
        return dict(self.disk_map)[letter]

    def element(self, letter: int) -> MoebiusElement:
        g = self.generators[abs(letter) - 1]
        return g if letter > 0 else inverse(g)

    def word_element(self, word: Sequence[int]) -> MoebiusElement:
        result = MoebiusElement.identity()
        for letter in word:
            result = compose(result, self.element(letter))
        return result


@dataclass(frozen=True)
class GeodesicClass:
    word: Tuple[int, ...]
    length: float
    primitive: bool = True

    @property
    def word_text(self) -> str:
        return ' '.join(str(a) for a in self.word)


@dataclass
class ValidationReport:
    """validate 的逐项检查结果，不抛异常"""
    passed: bool = True
    min_gap: float = math.inf
    max_boundary_error: float = 0.0
    min_trace_margin: float = math.inf
    failures: List[str] = field(default_factory=list)
    checks: Dict[str, float] = field(default_factory=dict)

    def fail(self, message: str):
        self.passed = False
        self.failures.append(message)


# ------------------------------------------------------------------
# 构造
def axis_element(length: float, shift: float = 0.0) -> MoebiusElement:
    """轴端点为 shift ± 1、平移长度为 length 的双曲元素（T_shift·A·T_{-shift}）"""
    ch, sh = math.cosh(length / 2), math.sinh(length / 2)
    return MoebiusElement(ch + shift * sh, sh - shift * shift * sh, sh, ch - shift * sh)


def _scaled_inverse_axis(length: float, scale: float) -> MoebiusElement:
    """轴端点为 ±scale、方向与 axis_element 相反的元素"""
    ch, sh = math.cosh(length / 2), math.sinh(length / 2)
    return MoebiusElement(ch, -scale * sh, -sh / scale, ch)


def build_from_generators(generators: Sequence[MoebiusElement],
                          disks: Optional[Dict[int, Disk]] = None,
                          boundary_lengths: Sequence[float] = (),
                          check: bool = True) -> SchottkyGroup:
    """
    由生成元构造 Schottky 群，默认圆盘系统为 g^{±1} 的等距圆盘
    :param disks: {字母: 圆盘}，缺省时 D_a = isometric_disk(g_a^{-1})
    :param check: 为 True 时校验失败抛 DiskOverlap
    """
    generators = tuple(generators)
    if not generators:
        raise SpectralError('至少需要一个生成元')
    if disks is None:
        disks = {}
        for i, g in enumerate(generators, start=1):
            disks[i] = isometric_disk(inverse(g))
            disks[-i] = isometric_disk(g)
    letters = []
    for i in range(1, len(generators) + 1):
        letters.extend([i, -i])
    missing = [a for a in letters if a not in disks]
    if missing:
        raise GroupSpecError(f'缺少字母 {missing} 对应的圆盘', field='disks')
    group = SchottkyGroup(
        generators=generators,
        disk_map=tuple((a, disks[a]) for a in letters),
        boundary_lengths=tuple(float(x) for x in boundary_lengths),
    )
    if check:
        report = validate(group)
        if not report.passed:
            raise DiskOverlap(f'圆盘系统无效: {"; ".join(report.failures)}', gap=report.min_gap)
    return group


def _side_by_side_axis(length: float, center: float, width: float) -> MoebiusElement:
    """轴端点为 center ± width 的双曲元素（由 axis_element 经 z → center + width·z 共轭）"""
    ch, sh = math.cosh(length / 2), math.sinh(length / 2)
    ratio = center / width
    return MoebiusElement(ch + ratio * sh, sh * (width * width - center * center) / width,
                          sh / width, ch - ratio * sh)


def _solve_trace(residual, lo: float, hi: float, what: str) -> float:
    while residual(hi) > 0 and hi < 700:
        hi *= 2
    try:
        return brentq(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    except ValueError as e:
        raise BisectionFailure(f'迹方程无法满足（{what}）: {e}')


def build_three_funnel(l1: float, l2: float, l3: float, normalization: str = NESTED,
                       check: bool = True) -> SchottkyGroup:
    """
    三漏斗曲面：|tr g1| = 2cosh(l1/2)，|tr g2| = 2cosh(l2/2)，tr(g1 g2) = -2cosh(l3/2)
    g1 轴为 (-1, 1)；g2 的轴由 normalization 决定：
      nested：轴为 (-R, R)，R 由二分法求解
      side_by_side：轴为 (c - w, c + w)，w = 1，c > 1 + w 由二分法求解；
        这种摆法下等距圆盘对短边界必然相交，(6,6,6) 也不例外
    """
    if min(l1, l2, l3) <= 0:
        raise SpectralError(f'边界长度必须为正: {(l1, l2, l3)}')
    if normalization not in (NESTED, SIDE_BY_SIDE):
        raise SpectralError(f'未知的三漏斗摆法: {normalization}')
    c1, s1 = math.cosh(l1 / 2), math.sinh(l1 / 2)
    c2, s2 = math.cosh(l2 / 2), math.sinh(l2 / 2)
    target = -2.0 * math.cosh(l3 / 2)
    g1 = axis_element(l1)

    if normalization == NESTED:
        # tr(g1 g2) = 2 c1 c2 - s1 s2 (R + 1/R)，对 log R 单调递减
        def residual(log_r):
            r = math.exp(log_r)
            return (2 * c1 * c2 - s1 * s2 * (r + 1 / r)) - target

        scale = math.exp(_solve_trace(residual, 0.0, 1.0, normalization))
        g2 = _scaled_inverse_axis(l2, scale)
        where = f'R={scale:.12g}'
    else:
        width = SIDE_BY_SIDE_WIDTH

        # tr(g1 g2) = 2 c1 c2 - s1 s2 (c² - 1 - w²)/w，对 c 单调递减
        def residual(center):
            return (2 * c1 * c2 - s1 * s2 * (center * center - 1 - width * width) / width) - target

        center = _solve_trace(residual, 1.0 + width, 4.0 * (1.0 + width), normalization)
        g2 = _side_by_side_axis(l2, center, width)
        where = f'c={center:.12g}, w={width:g}'

    trace_err = abs(compose(g1, g2).trace - target)
    if trace_err > 1e-9 * max(1.0, abs(target)):
        raise BisectionFailure(f'迹方程误差过大: {trace_err:.3g}')
    schottky_logger.info(f'三漏斗曲面构造完成: lengths={(l1, l2, l3)}, {normalization}, {where}')
    return build_from_generators([g1, g2], boundary_lengths=(l1, l2, l3), check=check)


# ------------------------------------------------------------------
# 校验
def validate(group: SchottkyGroup) -> ValidationReport:
    report = ValidationReport()
    letters = group.letters
    for idx, a in enumerate(letters):
        for b in letters[idx + 1:]:
            gap = group.disk(a).gap(group.disk(b))
            report.checks[f'gap[{a},{b}]'] = gap
            report.min_gap = min(report.min_gap, gap)
            if gap < DISK_GAP_TOL:
                report.fail(f'DiskOverlap: D[{a}] 与 D[{b}] 间距 {gap:.3g}')
    for i, g in enumerate(group.generators, start=1):
        margin = abs(g.trace) - 2.0
        report.checks[f'trace_margin[{i}]'] = margin
        report.min_trace_margin = min(report.min_trace_margin, margin)
        if not g.is_hyperbolic():
            report.fail(f'NotHyperbolic: 生成元 {i} 的 |tr|-2 = {margin:.3g}')
            continue
        src, dst = group.disk(-i), group.disk(i)
        image = apply_array(g, src.boundary(64))
        err = float(np.max(np.abs(np.abs(image - dst.center) - dst.radius)))
        # 外部映到内部：外部一点的像要落在 dst 内
        outside = src.center + 2.0 * src.radius + 1.0
        inside_ok = abs(complex(apply_array(g, np.array([outside + 0j]))[0]) - dst.center) < dst.radius
        report.checks[f'boundary_error[{i}]'] = err
        report.max_boundary_error = max(report.max_boundary_error, err)
        if err > BOUNDARY_TOL * max(1.0, dst.radius):
            report.fail(f'BoundaryMismatch: g{i} 把 ∂D[-{i}] 映到 ∂D[{i}] 的误差 {err:.3g}')
        if not inside_ok:
            report.fail(f'BoundaryMismatch: g{i} 没有把 D[-{i}] 的外部映入 D[{i}]')
    if report.passed:
        schottky_logger.info(f'群校验通过: rank={group.rank}, min_gap={report.min_gap:.6g}')
    else:
        schottky_logger.warning(f'群校验失败: {report.failures}')
    return report


# ------------------------------------------------------------------
# 循环字
def inverse_word(word: Sequence[int]) -> Tuple[int, ...]:
    return tuple(-a for a in reversed(word))


def is_cyclically_reduced(word: Sequence[int]) -> bool:
    k = len(word)
    if k == 0:
        return False
    return all(word[i] != -word[(i + 1) % k] for i in range(k)) if k > 1 else True


def is_proper_power(word: Sequence[int]) -> bool:
    k = len(word)
    for p in range(1, k):
        if k % p == 0 and tuple(word[:p]) * (k // p) == tuple(word):
            return True
    return False


def _letter_key(group_letters: Sequence[int]):
    order = {a: i for i, a in enumerate(group_letters)}
    return lambda word: tuple(order[a] for a in word)


def canonical_rotation(word: Sequence[int], key) -> Tuple[int, ...]:
    word = tuple(word)
    return min((word[i:] + word[:i] for i in range(len(word))), key=key)


def canonical_class(word: Sequence[int], key, convention: Convention) -> Tuple[int, ...]:
    rep = canonical_rotation(word, key)
    if convention == Convention.UNORIENTED:
        rep = min(rep, canonical_rotation(inverse_word(word), key), key=key)
    return rep


def displacement_table(group: SchottkyGroup) -> Dict[Tuple[int, int], float]:
    """
    相邻字母对的位移下界：对 z ∈ D_b (b ≠ -a)，-log|g_a'(z)| >= table[(a, b)]。
    循环约化字 a_1...a_k 的平移长度 >= Σ table[(a_i, a_{i+1})]（下标循环）
    """
    table: Dict[Tuple[int, int], float] = {}
    for a in group.letters:
        g = group.element(a)
        pole_center = -g.d / g.c if abs(g.c) > 0 else None
        if pole_center is None:
            raise SpectralError(f'字母 {a} 的元素固定无穷远点，无法给出位移下界')
        for b in group.letters:
            if b == -a:
                continue
            disk = group.disk(b)
            dist = abs(disk.center - pole_center) - disk.radius
            if dist <= 0:
                raise SpectralError(f'字母 {a} 的极点落在 D[{b}] 内')
            table[(a, b)] = 2.0 * math.log(abs(g.c) * dist)
    return table


def minimal_displacement(group: SchottkyGroup) -> float:
    """单个字母的最小位移 d_min：长度为 k 的字平移长度 >= k·d_min"""
    d_min = min(displacement_table(group).values())
    if d_min <= 0:
        raise SpectralError(f'最小位移 {d_min:.3g} 不为正，无法截断枚举')
    return d_min


def _expand_prefix(group: SchottkyGroup, prefix: Tuple[int, ...], max_len: int, budget: int,
                   l_max: float = math.inf):
    """
    从给定前缀出发深度优先生成约化字（含前缀本身）
    前缀的相邻位移和加上闭合的一步已超过 l_max 时剪枝，长度 <= l_max 的循环约化字不会被剪掉
    """
    table = displacement_table(group)
    d_min = min(table.values())
    out = []
    stack = [(prefix, sum(table[(prefix[i], prefix[i + 1])] for i in range(len(prefix) - 1)))]
    letters = group.letters
    visited = 0
    while stack:
        word, partial = stack.pop()
        visited += 1
        if visited > budget:
            raise BudgetExceeded(f'枚举节点数超过预算 {budget}', frontier=len(stack))
        out.append(word)
        if len(word) < max_len:
            for a in letters:
                if a == -word[-1]:
                    continue
                extended = partial + table[(word[-1], a)]
                if extended + d_min <= l_max + 1e-9:
                    stack.append((word + (a,), extended))
    return out


@lru_cache(maxsize=64)
def _classes_cached(group: SchottkyGroup, l_max: float, convention: Convention,
                    budget: int, threads: int, max_word_length: Optional[int]) -> Tuple[GeodesicClass, ...]:
    d_min = minimal_displacement(group)
    max_len = int(math.floor(l_max / d_min + 1e-12))
    if max_word_length is not None:
        max_len = min(max_len, max_word_length)
    schottky_logger.info(f'开始枚举本原类: l_max={l_max}, d_min={d_min:.6g}, 最大字长={max_len}, convention={convention.value}')
    if max_len < 1:
        return ()
    key = _letter_key(group.letters)
    per_prefix_budget = max(budget // len(group.letters), 1)

    def work(first_letter):
        found = {}
        for word in _expand_prefix(group, (first_letter,), max_len, per_prefix_budget, l_max):
            if not is_cyclically_reduced(word) or is_proper_power(word):
                continue
            rep = canonical_class(word, key, convention)
            if rep != word or rep in found:
                continue
            length = translation_length(group.word_element(rep))
            if length <= l_max:
                found[rep] = GeodesicClass(word=rep, length=length, primitive=True)
        return found

    merged = {}
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for found in pool.map(work, group.letters):
            merged.update(found)
    classes = sorted(merged.values(), key=lambda c: (c.length, key(c.word)))
    schottky_logger.info(f'枚举完成: 共 {len(classes)} 个本原类')
    return tuple(classes)


def primitive_classes(group: SchottkyGroup, l_max: float,
                      convention: Convention = Convention.UNORIENTED,
                      budget: int = DEFAULT_BUDGET, threads: int = 1,
                      max_word_length: Optional[int] = None) -> List[GeodesicClass]:
    """
    所有长度 <= l_max 的本原共轭类（按循环置换，Unoriented 时再按取逆归并），按长度排序
    :param max_word_length: 额外的字长上限（只用于小规模对照枚举）
    """
    if not l_max > 0:
        raise SpectralError(f'l_max 必须为正: {l_max}')
    return list(_classes_cached(group, float(l_max), Convention(convention), int(budget), int(threads),
                                max_word_length))


def cluster_lengths(classes: Sequence[GeodesicClass], tol: float = CLUSTER_TOL) -> List[Tuple[float, int]]:
    spectrum: List[List] = []
    for c in classes:
        if spectrum and abs(c.length - spectrum[-1][0]) <= tol:
            spectrum[-1][1] += 1
        else:
            spectrum.append([c.length, 1])
    return [(float(l), int(m)) for l, m in spectrum]


def length_spectrum(group: SchottkyGroup, l_max: float,
                    convention: Convention = Convention.UNORIENTED, **kwargs) -> List[Tuple[float, int]]:
    return cluster_lengths(primitive_classes(group, l_max, convention, **kwargs))


def spectrum_table(classes: Sequence[GeodesicClass], tol: float = CLUSTER_TOL) -> pd.DataFrame:
    """CSV 输出用：word, length, multiplicity（multiplicity 为同长度簇的大小）"""
    rows = []
    clusters = cluster_lengths(classes, tol)
    idx = 0
    for length, mult in clusters:
        for c in classes[idx: idx + mult]:
            rows.append({'word': c.word_text, 'length': c.length, 'multiplicity': mult})
        idx += mult
    return pd.DataFrame(rows, columns=['word', 'length', 'multiplicity'])


# ------------------------------------------------------------------
# 群描述文件（JSON）
class ThreeFunnelSpec(BaseModel):
    type: str = Field(..., pattern='^three_funnel$')
    lengths: List[float] = Field(..., min_length=3, max_length=3)
    normalization: str = Field(default=NESTED, pattern='^(nested|side_by_side)$')

    @field_validator('lengths')
    @classmethod
    def positive(cls, v):
        if any(x <= 0 for x in v):
            raise ValueError('lengths 必须全部为正')
        return v


class DiskSpec(BaseModel):
    letter: int
    center: float
    radius: float = Field(..., gt=0)


class MatrixGroupSpec(BaseModel):
    type: str = Field(..., pattern='^matrices$')
    generators: List[List[float]] = Field(..., min_length=1)
    disks: List[DiskSpec] = Field(default=[])

    @field_validator('generators')
    @classmethod
    def four_entries(cls, v):
        if any(len(g) != 4 for g in v):
            raise ValueError('每个生成元需要 4 个矩阵元 [a,b,c,d]')
        return v


class AxesSpec(BaseModel):
    """每个生成元由平移长度和轴中心给出，轴端点为 shift ± 1"""
    type: str = Field(..., pattern='^axes$')
    lengths: List[float] = Field(..., min_length=1)
    shifts: List[float] = Field(..., min_length=1)

    @field_validator('lengths')
    @classmethod
    def positive(cls, v):
        if any(x <= 0 for x in v):
            raise ValueError('lengths 必须全部为正')
        return v

    @field_validator('shifts')
    @classmethod
    def same_count(cls, v, info):
        lengths = info.data.get('lengths')
        if lengths is not None and len(v) != len(lengths):
            raise ValueError('shifts 与 lengths 的个数必须相同')
        return v


def group_from_spec(spec: dict) -> SchottkyGroup:
    if not isinstance(spec, dict) or 'type' not in spec:
        raise GroupSpecError('群描述缺少 type 字段', field='type')
    try:
        if spec['type'] == 'three_funnel':
            parsed = ThreeFunnelSpec(**spec)
            return build_three_funnel(*parsed.lengths, normalization=parsed.normalization)
        if spec['type'] == 'matrices':
            parsed = MatrixGroupSpec(**spec)
            gens = [MoebiusElement(*g) for g in parsed.generators]
            disks = {d.letter: Disk(d.center, d.radius) for d in parsed.disks} or None
            return build_from_generators(gens, disks)
        if spec['type'] == 'axes':
            parsed = AxesSpec(**spec)
            return build_from_generators([axis_element(l, s) for l, s in zip(parsed.lengths, parsed.shifts)])
    except ValidationError as e:
        first = e.errors()[0]
        loc = '.'.join(str(x) for x in first.get('loc', ()))
        raise GroupSpecError(f'群描述字段 {loc} 无效: {first.get("msg")}', field=loc)
    raise GroupSpecError(f'未知群类型: {spec["type"]}', field='type')


def load_group_spec(path) -> SchottkyGroup:
    path = Path(path)
    try:
        spec = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise GroupSpecError(f'群描述文件不是合法 JSON: {e}', field='<file>')
    schottky_logger.info(f'读取群描述文件: {path}')
    return group_from_spec(spec)
