import math

import numpy as np
import pytest

from Scripts.errors import (BadPinching, InsufficientData, ModelUnsupported, NegativePressureWindow,
                            NotCertified, WeightMissing)
from Scripts.potentials import constant_potential, parse_potential, sbr_potential
from Scripts.schottky import ClosedGeodesic, reference_group
from Scripts.thermo import (build_weight_table, critical_exponent, critical_exponent_from_counts, entropy,
                            load_weights, poincare_series_partial, pressure, save_weights,
                            sbr_pressure_bounds, shell_growth, shell_sums, weight)

from conftest import PLANTED_RATE, make_spectrum, planted_lengths


def test_entropy_recovers_planted_rate(planted):
    est = entropy(planted)
    assert est.value == pytest.approx(PLANTED_RATE, abs=0.05)
    assert est.estimator == "cumulative"
    lo, hi = est.window
    assert hi == planted.cutoff and lo == pytest.approx(0.5 * (1.25 + planted.cutoff))
    assert set(est.methods) == {"fit", "slope", "ratio"}
    assert est.tilt == 0.0
    assert est.method == "fit"


def test_entropy_refuses_bad_data(planted):
    with pytest.raises(InsufficientData):
        entropy(make_spectrum(planted_lengths(15)))
    uncertified = make_spectrum(planted_lengths(400), certified=False)
    with pytest.raises(NotCertified):
        entropy(uncertified)
    assert entropy(uncertified, force=True).value > 0


@pytest.mark.parametrize("c", [-0.3, 0.3])
def test_constant_potential_shifts_pressure(planted, c):
    h = entropy(planted).value
    weights = build_weight_table(constant_potential(c), planted)
    assert pressure(planted, weights).value == pytest.approx(h + c, abs=0.05)


@pytest.mark.parametrize("c", [-0.5, 0.3, 1.5])
def test_tilting_makes_pressure_shift_exactly(planted, c):
    h = entropy(planted).value
    est = pressure(planted, build_weight_table(constant_potential(c), planted))
    assert est.estimator == "tilted"
    assert est.tilt == pytest.approx(-c, abs=1e-4)
    assert est.value == pytest.approx(h + c, abs=1e-4)


def test_sbr_pressure_matches_bounds(planted):
    h = entropy(planted).value
    weights = build_weight_table(sbr_potential(-0.5), planted)
    lo, hi = sbr_pressure_bounds(h, 1.0, 1.0, 1)
    assert lo == hi == pytest.approx(h - 0.5)
    assert pressure(planted, weights).value == pytest.approx(lo, abs=0.05)


def test_negative_pressure_is_flagged(planted):
    weights = build_weight_table(constant_potential(-1.0), planted)
    with pytest.warns(NegativePressureWindow):
        est = pressure(planted, weights)
    assert est.nonpositive
    assert est.estimator == "tilted"
    assert est.value == pytest.approx(PLANTED_RATE - 1.0, abs=0.05)


def test_sbr_bounds_validation():
    assert sbr_pressure_bounds(1.0, 1.0, 2.0, 2) == (-1.0, 0.0)
    with pytest.raises(BadPinching):
        sbr_pressure_bounds(1.0, 2.0, 1.0, 1)
    with pytest.raises(BadPinching):
        sbr_pressure_bounds(1.0, 1.0, 1.0, 0)


def test_expression_weights_follow_the_axis(ref_group):
    a = ClosedGeodesic("a", "a", 1, 4.0, 4.0)
    # the axis of a is the imaginary axis, traversed from i to e^4 i
    assert weight(parse_potential("y"), a, ref_group) == pytest.approx(math.exp(4.0) - 1.0, rel=1e-9)
    aa = ClosedGeodesic("aa", "a", 2, 8.0, 4.0)
    assert weight(parse_potential("y"), aa, ref_group) == pytest.approx(2.0 * (math.exp(4.0) - 1.0), rel=1e-9)


def test_expression_weights_reproduce_constants(ref_group, ref_spectrum):
    flat = parse_potential("2 + 0*x*y")
    table = build_weight_table(flat, ref_spectrum.truncated(12.0), ref_group)
    for e in ref_spectrum.truncated(12.0).entries:
        assert table[e.canonical_word] == pytest.approx(2.0 * e.length, rel=1e-9)


def test_expression_weights_need_a_surface():
    lox = reference_group(4.0, twist=0.5)
    a = ClosedGeodesic("a", "a", 1, 4.0, 4.0, 0.5)
    with pytest.raises(ModelUnsupported):
        weight(parse_potential("y"), a, lox)
    with pytest.raises(ValueError):
        weight(parse_potential("y"), a)


def test_weight_table_file(planted, tmp_path):
    table = build_weight_table(constant_potential(0.25), planted)
    path = str(tmp_path / "w.csv")
    save_weights(table, path)
    back = load_weights(path)
    assert back.values == table.values
    assert list(back.to_frame().columns) == ["canonical_word", "U"]
    with pytest.raises(WeightMissing):
        back["not-a-class"]
    other = make_spectrum([1.0, 2.0], ks=[1, 2])
    with pytest.raises(WeightMissing):
        build_weight_table(constant_potential(0.25), other).array_for(planted)


def test_critical_exponent_from_planted_counts():
    radii = np.linspace(5.0, 20.0, 30)
    counts = np.round(3.0 * np.exp(0.6 * radii))
    est = critical_exponent_from_counts(radii, counts)
    assert est.value == pytest.approx(0.6, abs=1e-3)
    with pytest.raises(InsufficientData):
        critical_exponent_from_counts(radii[:5], counts[:5])


def test_critical_exponent_agrees_with_entropy(ref_group, ref_spectrum):
    h = entropy(ref_spectrum)
    delta = critical_exponent(ref_group, 24.0)
    assert 0.0 < h.value < 1.0
    assert 0.0 < delta.value < 1.0
    assert abs(h.value - delta.value) <= 0.05
    assert delta.complete


def test_poincare_series_partial(ref_group):
    total, count = poincare_series_partial(ref_group, 1.0, 8.0)
    assert count >= 5
    # identity contributes 1, the four generators e^{-4} each
    assert total > 1.0 + 4.0 * math.exp(-4.0) - 1e-12


def test_reference_pressures_follow_the_potential(ref_spectrum):
    h = entropy(ref_spectrum)
    assert h.uncertainty <= 0.05
    with pytest.warns(NegativePressureWindow):
        sbr = pressure(ref_spectrum, build_weight_table(sbr_potential(-0.5), ref_spectrum))
    assert sbr.value == pytest.approx(h.value - 0.5, abs=0.05)
    assert sbr.nonpositive
    for c in (-0.3, 0.3):
        est = pressure(ref_spectrum, build_weight_table(constant_potential(c), ref_spectrum))
        assert est.uncertainty <= 0.05
        assert abs(est.value - (h.value + c)) <= max(est.uncertainty, 0.05)


def test_shells_are_summed_without_cancellation(planted):
    lengths = planted.lengths
    weights = np.exp(-5.0 * lengths)
    grid = np.array([planted.cutoff - 1.0, planted.cutoff])
    shells = shell_sums(lengths, weights, grid, 2.0)
    for t, got in zip(grid, shells):
        inside = (lengths > t - 2.0) & (lengths <= t)
        assert got == pytest.approx(weights[inside].sum(), rel=1e-12)
        assert got > 0
    slope, _, _ = shell_growth(lengths, weights, planted.cutoff)
    assert slope == pytest.approx(PLANTED_RATE - 5.0, abs=0.1)
