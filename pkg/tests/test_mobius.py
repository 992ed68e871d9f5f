import math

import numpy as np
import pytest

from module.errors import FixesInfinity, NotHyperbolic, SpectralError
from module.mobius import (
    INFINITY,
    MoebiusElement,
    apply,
    compose,
    derivative,
    fixed_points,
    inverse,
    isometric_disk,
    multiplier,
    power,
    translation_length,
)


def test_compose_and_inverse():
    g = MoebiusElement(2.0, 3.0, 1.0, 2.0)
    assert compose(g, inverse(g)).close_to(MoebiusElement.identity())
    assert compose(MoebiusElement.identity(), g).close_to(g)
    d = compose(MoebiusElement.diagonal(1.0), MoebiusElement.diagonal(2.0))
    assert d.close_to(MoebiusElement.diagonal(3.0))


def test_normalizes_determinant():
    g = MoebiusElement(4.0, 6.0, 2.0, 4.0)
    assert g.det == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(SpectralError):
        MoebiusElement(1.0, 2.0, 2.0, 1.0)


def test_long_products_are_not_renormalized():
    # ad - bc 在长字上严重抵消，乘积保持原样
    g = MoebiusElement(math.cosh(5.0), math.sinh(5.0), math.sinh(5.0), math.cosh(5.0))
    h = power(g, 6)
    assert h.a + h.d == pytest.approx(2 * math.cosh(30.0), rel=1e-13)
    assert translation_length(h) == pytest.approx(60.0, abs=1e-12)
    assert translation_length(compose(h, g)) == pytest.approx(70.0, abs=1e-12)


def test_translation_length():
    assert translation_length(MoebiusElement.diagonal(1.0)) == pytest.approx(1.0, abs=1e-12)
    ch, sh = math.cosh(3.0), math.sinh(3.0)
    assert translation_length(MoebiusElement(ch, sh, sh, ch)) == pytest.approx(6.0, abs=1e-12)
    assert multiplier(MoebiusElement.diagonal(2.0)) == pytest.approx(math.exp(-2.0), rel=1e-12)


def test_rotation_is_not_hyperbolic():
    c, s = math.cos(0.3), math.sin(0.3)
    with pytest.raises(NotHyperbolic):
        translation_length(MoebiusElement(c, -s, s, c))


def test_length_is_conjugation_invariant():
    g = MoebiusElement(2.0, 3.0, 1.0, 2.0)
    h = MoebiusElement(1.5, 0.2, -0.7, 0.6)
    conj = compose(compose(h, g), inverse(h))
    assert translation_length(conj) == pytest.approx(translation_length(g), abs=1e-10)


def test_power_multiplies_length():
    g = MoebiusElement(2.0, 3.0, 1.0, 2.0)
    base = translation_length(g)
    for m in (2, 3, 5, -2):
        assert translation_length(power(g, m)) == pytest.approx(abs(m) * base, rel=1e-10)


def test_apply():
    assert apply(MoebiusElement.identity(), 1j) == 1j
    assert apply(MoebiusElement.diagonal(1.0), 1j) == pytest.approx(math.e * 1j, rel=1e-14)
    assert apply(MoebiusElement(2.0, 3.0, 1.0, 2.0), -2.0) == INFINITY


def test_apply_preserves_upper_half_plane():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        a, b, c, d = rng.normal(size=4)
        if a * d - b * c < 0:
            a, b = -a, -b
        if abs(a * d - b * c) < 1e-6:
            continue
        z = complex(rng.normal(), abs(rng.normal()) + 1e-3)
        assert apply(MoebiusElement(a, b, c, d), z).imag > 0


def test_isometric_disk():
    g = MoebiusElement(2.0, 3.0, 1.0, 2.0)
    disk = isometric_disk(g)
    assert disk.center == pytest.approx(-2.0)
    assert disk.radius == pytest.approx(1.0)
    with pytest.raises(FixesInfinity):
        isometric_disk(MoebiusElement.diagonal(1.0))


def test_isometric_disk_maps_to_inverse_disk():
    g = MoebiusElement(2.0, 3.0, 1.0, 2.0)
    source, target = isometric_disk(g), isometric_disk(inverse(g))
    for z in source.boundary(128):
        assert abs(abs(apply(g, z) - target.center) - target.radius) < 1e-10
        # 等距圆上 |g'| = 1
        assert abs(derivative(g, z)) == pytest.approx(1.0, abs=1e-12)


def test_fixed_points():
    ch, sh = math.cosh(1.0), math.sinh(1.0)
    repelling, attracting = fixed_points(MoebiusElement(ch, sh, sh, ch))
    assert repelling == pytest.approx(-1.0)
    assert attracting == pytest.approx(1.0)
    assert fixed_points(MoebiusElement.diagonal(1.0)) == (0.0, INFINITY)
