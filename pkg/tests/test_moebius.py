import math

import numpy as np
import pytest

from Scripts.errors import NotHyperbolic
from Scripts.moebius import (ComplexLength, IsometryClass, MoebiusTransform, act_boundary, act_point, axis,
                             classify, det_I_minus_Pk, displacement, fixed_points, is_infinite,
                             log_det_I_minus_Pk, log_weight_ratio, multipliers_from_length,
                             poincare_multipliers, translation_length)


def _b():
    c, s = math.cosh(2.0), math.sinh(2.0)
    return MoebiusTransform.from_entries(c, s, s, c)


def test_real_model_rejects_bad_matrices():
    with pytest.raises(ValueError):
        MoebiusTransform.from_entries(1j, 0, 0, -1j)
    with pytest.raises(ValueError):
        MoebiusTransform.from_entries(0, 1, 1, 0)
    with pytest.raises(ValueError):
        MoebiusTransform(np.eye(2), model_dim=4)


def test_normalised_to_unit_determinant():
    m = MoebiusTransform.from_entries(2.0, 0.0, 0.0, 8.0)
    assert abs(m.determinant - 1.0) < 1e-14
    assert m.equals(MoebiusTransform(-m.matrix))


def test_classify():
    assert classify(MoebiusTransform.identity()) is IsometryClass.IDENTITY
    assert classify(MoebiusTransform.from_entries(1, 1, 0, 1)) is IsometryClass.PARABOLIC
    rot = MoebiusTransform.from_entries(math.cos(0.5), -math.sin(0.5), math.sin(0.5), math.cos(0.5))
    assert classify(rot) is IsometryClass.ELLIPTIC
    assert classify(MoebiusTransform.diagonal(4.0)) is IsometryClass.HYPERBOLIC
    with pytest.raises(NotHyperbolic):
        translation_length(MoebiusTransform.from_entries(1, 1, 0, 1))


def test_translation_length_and_displacement():
    a = MoebiusTransform.diagonal(4.0)
    assert translation_length(a).ell == pytest.approx(4.0, rel=1e-14)
    assert displacement(a) == pytest.approx(4.0, rel=1e-12)
    assert translation_length(a @ _b()).ell == pytest.approx(2.0 * math.acosh(math.cosh(2.0) ** 2), rel=1e-12)


def test_loxodromic_complex_length():
    m = MoebiusTransform.diagonal(3.0, 0.7, model_dim=3)
    cl = translation_length(m)
    assert cl.ell == pytest.approx(3.0, rel=1e-12)
    assert cl.theta == pytest.approx(0.7, abs=1e-12)
    assert ComplexLength(1.0, 2.0).power(2).theta == pytest.approx(4.0 - 2.0 * math.pi)


def test_fixed_points_and_boundary_action():
    a = MoebiusTransform.diagonal(4.0)
    rep, att = fixed_points(a)
    assert rep == 0 and is_infinite(att)
    assert is_infinite(act_boundary(a, complex(math.inf, 0)))
    assert act_boundary(a, 1.0) == pytest.approx(math.exp(4.0))
    rep, att = fixed_points(_b())
    assert rep == pytest.approx(-1.0) and att == pytest.approx(1.0)


def test_axis_is_translated_by_the_length():
    b = _b()
    ax = axis(b)
    t = np.linspace(-2.0, 2.0, 9)
    z, h = ax(t)
    z2, h2 = act_point(b, z, h)
    z_exp, h_exp = ax(t + 4.0)
    assert np.allclose(z2, z_exp, atol=1e-10)
    assert np.allclose(h2, h_exp, rtol=1e-10)


def test_determinant_factor():
    assert math.exp(log_det_I_minus_Pk(2.0, 0.0, 1, 2)) == pytest.approx(4.0 * math.sinh(1.0) ** 2, rel=1e-12)
    m = MoebiusTransform.diagonal(1.5, 0.4, model_dim=3)
    direct = float(np.prod(np.abs(1.0 - multipliers_from_length(translation_length(m).power(3), 3))))
    assert det_I_minus_Pk(m, 3) == pytest.approx(direct, rel=1e-10)
    with pytest.raises(ValueError):
        det_I_minus_Pk(m, 0)


def test_weight_ratio_has_no_cancellation():
    assert log_weight_ratio(40.0, 0.0, 1, 2) == pytest.approx(math.exp(-40.0), rel=1e-10)
    assert log_weight_ratio(1.0, 0.3, 2, 3) == pytest.approx(
        -2.0 * math.log(abs(1.0 - np.exp(complex(-2.0, 0.6)))), rel=1e-12)
    assert log_weight_ratio(0.5, 0.0, 1, 2) == pytest.approx(-math.log(1.0 - math.exp(-0.5)), rel=1e-12)


def test_length_is_a_conjugacy_invariant():
    g = MoebiusTransform.diagonal(4.0) @ _b()
    for h in (_b(), MoebiusTransform.from_entries(2.0, 1.0, 3.0, 2.0), MoebiusTransform.from_entries(1, 1, 0, 1)):
        conj = h @ g @ h.inverse()
        assert translation_length(conj).ell == pytest.approx(translation_length(g).ell, rel=1e-10)


def test_length_of_a_power():
    g = MoebiusTransform.diagonal(4.0) @ _b()
    ell = translation_length(g).ell
    for k in (2, 3, 5):
        assert translation_length(g.power(k)).ell == pytest.approx(k * ell, rel=1e-10)
    lox = MoebiusTransform.diagonal(3.0, 0.7, model_dim=3)
    cube = translation_length(lox.power(3))
    assert cube.ell == pytest.approx(9.0, rel=1e-10)
    assert cube.theta == pytest.approx(2.1, abs=1e-10)


def test_shear_displacement():
    assert displacement(MoebiusTransform.from_entries(1, 1, 0, 1)) == pytest.approx(math.acosh(1.5), rel=1e-14)


def test_poincare_multipliers_match_the_boundary_derivative():
    eps = 1e-6
    b = _b()
    rep, att = fixed_points(b)
    expanding, contracting = poincare_multipliers(b)

    def slope(z):
        return (act_boundary(b, z + eps) - act_boundary(b, z - eps)) / (2 * eps)

    assert slope(rep) == pytest.approx(expanding, rel=1e-5)
    assert slope(att) == pytest.approx(contracting, rel=1e-5)
    assert expanding * contracting == pytest.approx(1.0, rel=1e-12)

    lox = MoebiusTransform.diagonal(3.0, 0.7, model_dim=3)
    # z -> e^{3 + 0.7i} z, so the difference quotient at 0 is exact
    assert act_boundary(lox, eps) / eps == pytest.approx(poincare_multipliers(lox)[0], rel=1e-10)
