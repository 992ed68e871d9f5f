import cmath
import math

import numpy as np
import pytest

from module.errors import BudgetExceeded, OutsideConvergence, SpectralError
from module.schottky import Convention, build_three_funnel
from module.zeta import (
    EulerConfig,
    EulerMode,
    Rect,
    cycle_lengths,
    dlog_Z_euler,
    dlog_Z_fredholm,
    estimate_delta,
    euler_tail_bound,
    find_zeros,
    fredholm_det,
    fredholm_report,
    leading_eigenvalue,
    log_Z_euler,
    log_Z_euler_result,
    log_Z_product,
    transfer_matrix,
    winding_number,
)

# (6,6,6) 的回归值，由独立的循环展开程序（字长 10、11 两档一致）核对
DELTA_666 = 0.229104326894
Z_666_AT_0429 = 0.594109768045
RESONANCES_666 = (complex(0.2289987377, 1.0384063294), complex(0.2286818439, 2.0768110283))


def cylinder_product(lam, length=2.0, terms=60):
    """rank 1 群的闭式：Π_k (1 - e^{-(λ+k)l})"""
    value = 1.0 + 0j
    for k in range(terms):
        value *= 1.0 - cmath.exp(-(lam + k) * length)
    return value


@pytest.fixture(scope='module')
def delta_666(funnel_666):
    return estimate_delta(funnel_666)


def test_euler_config_validation():
    with pytest.raises(SpectralError):
        EulerConfig(l_max=0.0)
    with pytest.raises(SpectralError):
        EulerConfig(term_tol=2.0)
    assert EulerConfig(convention='unoriented').convention == Convention.UNORIENTED
    assert EulerConfig(mode='cycles').mode == EulerMode.CYCLES
    with pytest.raises(SpectralError):
        EulerConfig(mode='cycles', convention='unoriented')
    for depth in (0, 13):
        with pytest.raises(SpectralError):
            EulerConfig(mode='cycles', depth=depth)


def test_cycle_lengths_of_short_words(funnel_666):
    lengths = cycle_lengths(funnel_666, 3)
    assert len(lengths) == 3
    assert np.allclose(lengths[0], 6.0, atol=1e-12)
    # 长度 2：g1 g2 一类给出第三条边界（长度 6），平方给出 12
    pairs = np.sort(lengths[1])
    assert len(pairs) == 12
    assert np.allclose(pairs[:4], 6.0, atol=1e-10)
    assert np.sum(np.isclose(pairs, 12.0, atol=1e-10)) == 4
    # 长度 3 的约化字 36 个，其中首尾互逆的 8 个不是循环约化的
    assert len(lengths[2]) == 28
    with pytest.raises(BudgetExceeded):
        cycle_lengths(funnel_666, 10, 1000)


@pytest.mark.parametrize('lam', [1.0, complex(0.5, 2.0), complex(0.2, -3.0)])
def test_cylinder_cycles_match_closed_form(cylinder, lam):
    cfg = EulerConfig(delta=0.0, mode='cycles')
    value = log_Z_euler_result(cylinder, lam, cfg)
    assert value.mode == EulerMode.CYCLES
    assert cmath.exp(value.value) == pytest.approx(cylinder_product(lam) ** 2, rel=1e-12)


def test_cycles_match_classes_far_right(funnel_666, delta_666):
    classes = EulerConfig(delta=delta_666)
    cycles = EulerConfig(delta=delta_666, mode='cycles')
    for lam in (2.5, complex(2.0, 3.0)):
        assert log_Z_euler(funnel_666, lam, cycles) == pytest.approx(log_Z_euler(funnel_666, lam, classes),
                                                                    abs=1e-12)
        assert dlog_Z_euler(funnel_666, lam, cycles) == pytest.approx(dlog_Z_euler(funnel_666, lam, classes),
                                                                     abs=1e-10)


def test_cycles_match_fredholm_on_grid(funnel_666, delta_666):
    """Re λ ∈ [δ+0.2, δ+2]、|Im λ| <= 5 上 4 x 5 个点"""
    cfg = EulerConfig(delta=delta_666, mode='cycles')
    for re in np.linspace(delta_666 + 0.2, delta_666 + 2.0, 4):
        for im in np.linspace(-5.0, 5.0, 5):
            lam = complex(re, im)
            result = log_Z_euler_result(funnel_666, lam, cfg)
            det = fredholm_det(funnel_666, lam)
            assert abs(cmath.exp(result.value) - det) / abs(det) <= 1e-8
            assert result.tail_bound < 1e-8


def test_zeta_regression_value(funnel_666):
    lam = 0.429104326894
    assert fredholm_det(funnel_666, lam).real == pytest.approx(Z_666_AT_0429, abs=1e-9)
    cfg = EulerConfig(delta=DELTA_666, mode='cycles')
    assert cmath.exp(log_Z_euler(funnel_666, lam, cfg)).real == pytest.approx(Z_666_AT_0429, abs=1e-10)


def test_euler_is_tiny_far_right(funnel_666, delta_666):
    cfg = EulerConfig(delta=delta_666)
    assert abs(log_Z_euler(funnel_666, 50.0, cfg)) < 1e-20


def test_euler_rejects_outside_convergence(funnel_666, delta_666):
    cfg = EulerConfig(delta=delta_666)
    with pytest.raises(OutsideConvergence):
        log_Z_euler(funnel_666, delta_666, cfg)
    with pytest.raises(OutsideConvergence):
        dlog_Z_euler(funnel_666, complex(delta_666 - 0.5, 3.0), cfg)


def test_cylinder_euler_matches_closed_form(cylinder):
    cfg = EulerConfig(convention=Convention.UNORIENTED, delta=0.0)
    expected = cmath.log(cylinder_product(1.0))
    assert log_Z_euler(cylinder, 1.0, cfg) == pytest.approx(expected, abs=1e-12)
    assert log_Z_product(cylinder, 1.0, cfg) == pytest.approx(expected, abs=1e-12)


def test_euler_product_and_series_agree(funnel_666, delta_666):
    cfg = EulerConfig(delta=delta_666)
    for lam in (1.5, complex(2.0, 3.0), complex(1.2, -7.0)):
        assert log_Z_product(funnel_666, lam, cfg) == pytest.approx(log_Z_euler(funnel_666, lam, cfg), abs=1e-12)


def test_dlog_matches_finite_difference(funnel_666, delta_666):
    cfg = EulerConfig(delta=delta_666)
    h = 1e-4
    fd = (log_Z_euler(funnel_666, 2.0 + h, cfg) - log_Z_euler(funnel_666, 2.0 - h, cfg)) / (2 * h)
    assert dlog_Z_euler(funnel_666, 2.0, cfg) == pytest.approx(fd, abs=1e-8)


def test_conjugate_symmetry(funnel_666, delta_666):
    cfg = EulerConfig(delta=delta_666)
    lam = complex(1.3, 2.7)
    assert dlog_Z_euler(funnel_666, lam.conjugate(), cfg) == pytest.approx(
        dlog_Z_euler(funnel_666, lam, cfg).conjugate(), abs=1e-14)
    for z in (complex(0.3, 4.0), complex(-0.7, 1.1)):
        assert fredholm_det(funnel_666, z.conjugate()) == pytest.approx(fredholm_det(funnel_666, z).conjugate(),
                                                                       abs=1e-10)


def test_tail_bound(funnel_666, delta_666):
    cfg = EulerConfig(delta=delta_666)
    assert euler_tail_bound(funnel_666, delta_666 + 0.01, cfg) == math.inf
    near = euler_tail_bound(funnel_666, delta_666 + 1.2, cfg)
    far = euler_tail_bound(funnel_666, delta_666 + 2.0, cfg)
    assert 0 < far < near < 1e-8
    result = log_Z_euler_result(funnel_666, 3.0, cfg)
    assert result.n_classes > 0
    assert result.tail_bound < 1e-20


@pytest.mark.parametrize('lam', [0.5, complex(0.3, 2.0), complex(-1.5, 4.0)])
def test_cylinder_fredholm_is_square_of_product(cylinder, lam):
    # Oriented 约定：g 与 g^{-1} 各贡献一个因子
    expected = cylinder_product(lam) ** 2
    assert fredholm_det(cylinder, lam, 24) == pytest.approx(expected, rel=1e-9, abs=1e-10)


def test_fredholm_converges_in_nodes(funnel_666):
    lam = complex(0.5, 3.0)
    coarse = fredholm_det(funnel_666, lam, 24)
    fine = fredholm_det(funnel_666, lam, 48)
    assert abs(coarse - fine) < 1e-10
    report = fredholm_report(funnel_666, lam, 24)
    assert report.doubling_change < 1e-10
    assert report.value == coarse


def test_transfer_matrix_norm_decreases(funnel_666):
    norms = [np.linalg.norm(transfer_matrix(funnel_666, s).matrix) for s in (0.5, 1.0, 2.0, 4.0)]
    assert all(a > b for a, b in zip(norms, norms[1:]))


@pytest.mark.parametrize('offset', [1.2, 2.0])
@pytest.mark.parametrize('im', [-5.0, 0.0, 5.0])
def test_fredholm_matches_euler(funnel_666, delta_666, offset, im):
    cfg = EulerConfig(delta=delta_666)
    lam = complex(delta_666 + offset, im)
    result = log_Z_euler_result(funnel_666, lam, cfg)
    det = fredholm_det(funnel_666, lam)
    assert abs(cmath.exp(result.value) - det) / abs(det) <= 1e-8 + result.tail_bound


def test_zeta_nonzero_at_half(funnel_666):
    assert abs(fredholm_det(funnel_666, 0.5)) > 1e-6


def test_dlog_fredholm_matches_euler(funnel_666, delta_666):
    cfg = EulerConfig(delta=delta_666)
    lam = complex(2.0, 1.0)
    assert dlog_Z_fredholm(funnel_666, lam) == pytest.approx(dlog_Z_euler(funnel_666, lam, cfg), abs=1e-8)


def test_delta_rank_one_is_zero(cylinder):
    assert estimate_delta(cylinder) == 0.0


def test_delta_three_funnel(funnel_666, delta_666):
    assert 0.0 < delta_666 < 0.5
    assert leading_eigenvalue(funnel_666, delta_666) == pytest.approx(1.0, abs=1e-8)
    assert estimate_delta(build_three_funnel(8.0, 8.0, 8.0)) < delta_666


def test_delta_rejects_tiny_tolerance(funnel_666):
    with pytest.raises(SpectralError):
        estimate_delta(funnel_666, 1e-12)


def test_no_zeros_in_convergence_region(funnel_666, delta_666):
    assert find_zeros(funnel_666, Rect(delta_666 + 0.1, delta_666 + 1.0, -3.0, 3.0)) == []
    assert find_zeros(funnel_666, Rect(0.45, 0.55, 0.5, 4.0)) == []


def test_cylinder_double_zero(cylinder):
    rect = Rect(-0.4, 0.4, 2.8, 3.5)
    zeros = find_zeros(cylinder, rect)
    assert len(zeros) == 1
    assert zeros[0].multiplicity == 2
    assert abs(zeros[0].location - 1j * math.pi) < 1e-6
    count, _, safe = winding_number(lambda lam: fredholm_det(cylinder, lam), rect)
    assert safe
    assert count == sum(z.multiplicity for z in zeros)


def test_cylinder_zeros_in_strip(cylinder):
    """-1.5 < Re λ < 0.4, 0.5 < Im λ < 3.5 内只有 iπ 与 -1 + iπ 两个二重零点"""
    zeros = find_zeros(cylinder, Rect(-1.5, 0.4, 0.5, 3.5))
    assert [z.multiplicity for z in zeros] == [2, 2]
    locations = sorted((z.location for z in zeros), key=lambda z: z.real)
    assert abs(locations[0] - complex(-1.0, math.pi)) < 1e-6
    assert abs(locations[1] - complex(0.0, math.pi)) < 1e-6


def test_delta_regression(delta_666):
    assert delta_666 == pytest.approx(DELTA_666, abs=1e-9)


def test_dlog_fredholm_is_analytic(funnel_666, delta_666):
    cycles = EulerConfig(delta=delta_666, mode='cycles')
    for lam in (complex(0.5, 3.0), complex(0.5, -6.0), complex(1.0, 0.4)):
        assert dlog_Z_fredholm(funnel_666, lam) == pytest.approx(dlog_Z_euler(funnel_666, lam, cycles), abs=1e-8)
    # Euler 半平面以外与行列式的中心差分对照
    lam, h = complex(0.1, 2.0), 1e-5
    fd = cmath.log(fredholm_det(funnel_666, lam + h) / fredholm_det(funnel_666, lam - h)) / (2 * h)
    assert dlog_Z_fredholm(funnel_666, lam) == pytest.approx(fd, abs=1e-6)


def test_dlog_fredholm_conjugate_symmetry(funnel_666):
    for z in np.linspace(0.0, 20.0, 9):
        lam = complex(0.5, z)
        assert dlog_Z_fredholm(funnel_666, lam.conjugate()) == pytest.approx(
            dlog_Z_fredholm(funnel_666, lam).conjugate(), abs=1e-10)


def test_three_funnel_resonances(funnel_666):
    zeros = find_zeros(funnel_666, Rect(0.15, 0.3, 0.5, 2.5))
    assert [z.multiplicity for z in zeros] == [1, 1]
    for record, expected in zip(zeros, RESONANCES_666):
        assert abs(record.location - expected) < 1e-7
        assert record.refined
        assert record.as_dict()['refined'] is True


def test_unrefined_zero_is_flagged(cylinder):
    zeros = find_zeros(cylinder, Rect(-0.4, 0.4, 2.8, 3.5), tol=0.0)
    assert len(zeros) == 1
    assert zeros[0].multiplicity == 2
    assert not zeros[0].refined
    assert zeros[0].as_dict()['refined'] is False
    assert zeros[0].residual > 0.0
