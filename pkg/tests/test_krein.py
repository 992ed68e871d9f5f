import cmath
import math

import numpy as np
import pytest

from module.contour import Side
from module.errors import RouteUnavailable, SpectralError
from module.krein import (
    KreinEvaluator,
    ZetaRoute,
    det_Pk,
    det_Pk_result,
    det_SX,
    det_SX_functional,
    det_SX_phase,
    divisor_at,
    dxi,
    dxi_growth_check,
    dxi_raw,
    phase_derivative,
    pk_contour,
    verify_m_half,
    weyl_check,
    xi,
    xi_grid,
    z_ratio,
)
from module.specialfn import integral_L
from module.zeta import Rect, find_zeros

# (6,6,6) 的回归值，由独立的循环展开程序（字长 10、11 两档一致，Gauss-Legendre 积分）核对
XI_666_AT_10 = 49.934648678709
WEYL_666_SUP_RATIO = 0.0279012037628
WEYL_666_FITTED_LEADING = 0.500433578832


def test_evaluator_constants(evaluator_666):
    assert evaluator_666.chi == -1
    assert evaluator_666.volume_term == pytest.approx(2 * math.pi, rel=1e-14)
    assert evaluator_666.sh_exponent == pytest.approx(2j * math.pi * evaluator_666.chi, rel=1e-14)
    assert evaluator_666.active_route == ZetaRoute.EULER
    # 临界线在 Euler 半平面内，更靠左的点退回 Fredholm
    assert evaluator_666.route_for(complex(0.5, 3.0)) == ZetaRoute.EULER
    assert evaluator_666.route_for(complex(0.2, 3.0)) == ZetaRoute.FREDHOLM


def test_euler_route_needs_small_delta(funnel_666):
    with pytest.raises(RouteUnavailable):
        KreinEvaluator(group=funnel_666, delta=0.47, route='euler')
    auto = KreinEvaluator(group=funnel_666, delta=0.47, route='auto')
    assert auto.active_route == ZetaRoute.FREDHOLM
    assert auto.route_for(complex(0.5, 1.0)) == ZetaRoute.FREDHOLM


def test_dxi_is_even(evaluator_666):
    for z in (0.3, 1.7, 4.2):
        assert dxi(evaluator_666, -z) == pytest.approx(dxi(evaluator_666, z), abs=1e-9)


@pytest.mark.parametrize('which', ['auto', 'fredholm'])
def test_dxi_imaginary_part_vanishes(evaluator_666, evaluator_666_fredholm, which):
    ev = evaluator_666 if which == 'auto' else evaluator_666_fredholm
    for z in np.linspace(0.0, 20.0, 21):
        raw = dxi_raw(ev, z)
        assert abs(raw.imag) <= 1e-9 * max(1.0, abs(raw.real))


def test_dxi_routes_agree(evaluator_666, evaluator_666_fredholm):
    for z in (0.5, 2.0, 5.0):
        assert dxi(evaluator_666_fredholm, z) == pytest.approx(dxi(evaluator_666, z), abs=1e-8)


def test_dxi_large_z_follows_volume_term(evaluator_666):
    z = 20.0
    ratio = dxi(evaluator_666, z) / (-evaluator_666.chi * z * math.tanh(math.pi * z))
    assert ratio == pytest.approx(1.0, abs=0.02)


def test_xi_is_odd(evaluator_666):
    assert xi(evaluator_666, 0.0) == 0.0
    assert xi(evaluator_666, -3.0) == pytest.approx(-xi(evaluator_666, 3.0), abs=1e-8)
    grid = xi_grid(evaluator_666, [-2.0, 0.0, 1.0, 2.0])
    assert grid[1] == 0.0
    assert grid[0] == pytest.approx(-grid[3], abs=1e-8)
    assert grid[3] == pytest.approx(xi(evaluator_666, 2.0), abs=1e-8)


def test_xi_regression(evaluator_666):
    assert xi(evaluator_666, 10.0) == pytest.approx(XI_666_AT_10, abs=1e-7)


def test_det_SX_at_zero(evaluator_666):
    assert det_SX(evaluator_666, 0.0) == 1
    assert verify_m_half(evaluator_666) == 0
    with pytest.raises(SpectralError):
        verify_m_half(evaluator_666, 1)


@pytest.mark.parametrize('z', [0.25, 0.5, 1.0, 2.0, 4.0])
def test_functional_equation_residual(evaluator_666, z):
    """左边取 Fredholm 行列式之比，右边的 ξ 取 Euler 路线（循环展开）"""
    ev = evaluator_666
    assert ev.route_for(complex(0.5, z)) == ZetaRoute.EULER
    lhs = z_ratio(ev, z)
    rhs = det_SX_phase(ev, z, 0) * cmath.exp(-ev.sh_exponent * integral_L(ev.n, z))
    assert abs(lhs - rhs) / abs(lhs) <= 1e-6
    functional = det_SX_functional(ev, z)
    assert abs(functional) == pytest.approx(1.0, abs=1e-8)
    assert det_SX(ev, z) == det_SX_phase(ev, z, 0)


def test_det_SX_complex_argument_uses_functional_route(evaluator_666):
    z = complex(1.0, 0.2)
    assert det_SX(evaluator_666, z) == det_SX_functional(evaluator_666, z)


def test_phase_derivative(evaluator_666):
    for z in (0.3, 0.7, 1.2, 1.6, 2.1, 2.5, 3.0, 3.4, 3.9, 4.5):
        expected = -2 * math.pi * dxi(evaluator_666, z)
        assert phase_derivative(evaluator_666, z) == pytest.approx(expected, rel=1e-6, abs=1e-6)


def test_det_P1_is_contour_independent(evaluator_666):
    values = []
    for side in (Side.UPPER, Side.LOWER):
        for radius in (0.05, 0.1):
            result = det_Pk_result(evaluator_666, 1, pk_contour(1, 1, radius, side))
            assert abs(result.value.imag) <= 1e-8 * max(1.0, abs(result.value.real))
            values.append(result.value)
    for v in values[1:]:
        assert v == pytest.approx(values[0], rel=1e-8, abs=1e-10)
    assert det_Pk(evaluator_666, 1) == pytest.approx(values[0], rel=1e-8, abs=1e-10)


def test_det_Pk_rejects_bad_k(evaluator_666):
    with pytest.raises(SpectralError):
        det_Pk(evaluator_666, 0)


def test_divisor_at_cylinder_resonance(evaluator_cylinder):
    # Z(1/2 + iz) 在 z = π + i/2（λ = iπ）处有二重零点
    record = divisor_at(evaluator_cylinder, complex(math.pi, 0.5), 0.2)
    assert record.winding == -2
    assert abs(record.raw - record.winding) < 1e-3
    assert divisor_at(evaluator_cylinder, complex(math.pi, 0.5), 0.3).winding == -2


def test_divisor_vanishes_where_zeta_has_no_zeros(evaluator_666):
    # 圆盘上 Re(1/2 ± iz) > δ，Euler 乘积收敛，Z 没有零点
    radius = min(0.2, (0.5 - evaluator_666.delta) / 2)
    for center in (1.0, 2.0, 3.0):
        record = divisor_at(evaluator_666, center, radius)
        assert record.winding == 0
        assert record.interpretation == 'regular'


@pytest.mark.slow
def test_divisor_windings_on_twelve_circles(evaluator_666, funnel_666):
    zeros = find_zeros(funnel_666, Rect(0.15, 0.3, 0.5, 2.5))
    assert [z.multiplicity for z in zeros] == [1, 1]
    # λ = 1/2 + iz，Z(1/2 + iz) 的零点在上半平面，共轭处是 Z(1/2 - iz) 的零点
    first, second = (-1j * (z.location - 0.5) for z in zeros)
    records = [
        divisor_at(evaluator_666, first, 0.2),
        divisor_at(evaluator_666, second, 0.2),
        divisor_at(evaluator_666, first.conjugate(), 0.2),
        divisor_at(evaluator_666, first.real, 0.4),
    ]
    assert [r.winding for r in records] == [-1, -1, 1, 0]
    assert records[0].interpretation == 'zeros of Z(n/2+iz) dominate'
    # 大圆恰好包住 first 与它的共轭，绕数可加
    assert records[3].winding == records[0].winding + records[2].winding
    for center in np.arange(0.5, 4.5, 0.5):
        records.append(divisor_at(evaluator_666, center, 0.1))
        assert records[-1].winding == 0
    assert len(records) == 12
    for r in records:
        assert abs(r.raw - r.winding) <= 1e-3


def test_divisor_circle_through_l_pole_is_nudged(evaluator_666):
    # 64 个点里 θ = π 那一点正好落在 L 的极点 z = i/2（也是 Z(λ) 在 λ = 0 的零点）上
    center = complex(0.2, 0.5)
    record = divisor_at(evaluator_666, center, 0.2)
    assert record.radius == pytest.approx(0.22)
    assert record.winding == divisor_at(evaluator_666, center, 0.22).winding
    assert record.winding == -1


def test_growth_check(evaluator_666):
    report = dxi_growth_check(evaluator_666, [0.5, 1.0, 3.0])
    assert report.passed
    assert np.all(report.deviation <= report.bound * (1 + 1e-9) + 1e-9)


@pytest.mark.slow
def test_weyl_asymptotics(evaluator_666):
    report = weyl_check(evaluator_666, T=20.0, samples=31)
    assert report.predicted_leading == pytest.approx(0.5, rel=1e-12)
    assert report.relative_error <= 0.03
    assert report.fitted_leading == pytest.approx(WEYL_666_FITTED_LEADING, abs=1e-6)
    assert report.sup_residual_over_t == pytest.approx(WEYL_666_SUP_RATIO, abs=1e-7)
    assert report.increasing
    with pytest.raises(SpectralError):
        weyl_check(evaluator_666, T=4.0)
