import math

import numpy as np
import pytest

from Scripts import words as W
from Scripts.errors import (CutoffExceeded, DegenerateDisks, DigestMismatch, FormatError, GroupFileError,
                            PingPongViolation, ResourceExceeded, TooFewGeodesics)
from Scripts.moebius import det_I_minus_Pk, translation_length
from Scripts.schottky import (BoundaryDisk, EnumerationLimits, SchottkyGroup, counting_function, disk_within,
                              enumerate_spectrum, group_document, group_from_document, image_disk,
                              load_group, load_spectrum, non_arithmeticity_check, orbit_displacements,
                              reference_group, save_group, save_spectrum, spectrum_from_text, spectrum_to_text,
                              validate_ping_pong)

from conftest import REFERENCE_CUTOFF, REFERENCE_JSON, make_spectrum

SHORT_CUTOFF = 7.0


def test_certificate_for_reference_group(ref_group):
    cert = validate_ping_pong(ref_group)
    assert 0.0 < cert.kappa < 0.1
    assert cert.rate_min == pytest.approx(-math.log(cert.kappa))
    assert cert.additive_constant > 0
    assert cert.rates_array().shape == (4, 4)
    assert cert.guaranteed_cutoff(10) == pytest.approx(10 * cert.rate_min - cert.additive_constant)


def test_overlapping_disks_are_rejected():
    with pytest.raises(DegenerateDisks):
        validate_ping_pong(reference_group(1.0))


def test_wrong_target_disk_is_a_ping_pong_violation(ref_group):
    disks = (BoundaryDisk("a", 0j, math.exp(2.5), exterior=True),) + ref_group.disks[1:]
    bad = SchottkyGroup(ref_group.generators, disks, 2)
    with pytest.raises(PingPongViolation) as exc:
        validate_ping_pong(bad)
    assert exc.value.letter == "a"


def test_group_needs_rank_two_and_one_disk_per_letter(ref_group):
    with pytest.raises(GroupFileError):
        SchottkyGroup(ref_group.generators[:1], ref_group.disks[:2], 2)
    with pytest.raises(GroupFileError):
        SchottkyGroup(ref_group.generators, ref_group.disks[:3], 2)


def test_image_disk_matches_ping_pong(ref_group):
    a = ref_group.letter_matrix("a")
    img = image_disk(a, ref_group.disk("A").complement())
    assert img.exterior
    assert img.radius == pytest.approx(math.exp(2.0))
    assert disk_within(img, ref_group.disk("a"))


def test_group_documents(ref_group, tmp_path):
    from_file = load_group(REFERENCE_JSON)
    assert from_file.rank == 2
    for w in ("a", "b", "ab", "aBAb"):
        assert translation_length(from_file.word_matrix(w)).ell == pytest.approx(
            translation_length(ref_group.word_matrix(w)).ell, rel=1e-12)
    again = group_from_document(group_document(ref_group))
    assert again.digest == ref_group.digest
    path = str(tmp_path / "saved.json")
    save_group(ref_group, path)
    assert load_group(path).digest == ref_group.digest
    with pytest.raises(GroupFileError):
        load_group(str(tmp_path / "missing.json"))
    with pytest.raises(GroupFileError):
        group_from_document({"model_dim": 2, "generators": []})


def test_shortest_classes(ref_group):
    spec = enumerate_spectrum(ref_group, SHORT_CUTOFF)
    assert spec.certified
    words = [e.canonical_word for e in spec.entries]
    assert set(words[:4]) == {"a", "A", "b", "B"}
    assert set(words[4:]) == {"ab", "aB", "Ab", "AB"}
    assert np.allclose(spec.lengths[:4], 4.0, rtol=1e-12)
    assert np.allclose(spec.lengths[4:], 2.0 * math.acosh(math.cosh(2.0) ** 2), rtol=1e-12)


def test_classes_match_brute_force(ref_group):
    cutoff = 12.0
    spec = enumerate_spectrum(ref_group, cutoff)
    expected = set()
    for m in range(1, 7):
        for w in W.reduced_words(2, m):
            if not W.is_cyclically_reduced(w):
                continue
            if translation_length(ref_group.word_matrix(w)).ell <= cutoff + 1e-9:
                expected.add(W.canonical_form(w))
    assert {e.canonical_word for e in spec.entries} == expected


def test_inverse_classes_share_one_length(ref_group):
    spec = enumerate_spectrum(ref_group, 12.0)
    by_word = {e.canonical_word: e for e in spec.entries}
    for w, e in by_word.items():
        inv = W.canonical_form(W.inverse(w))
        assert inv in by_word
        assert by_word[inv].length == e.length
        assert by_word[inv].theta_p == e.theta_p
    # b cubed sits at the cutoff
    assert {"bbb", "BBB"} <= set(by_word)


def test_powers_are_recorded(ref_spectrum):
    aa = [e for e in ref_spectrum.entries if e.canonical_word == "aa"]
    assert len(aa) == 1
    assert aa[0].primitive_word == "a" and aa[0].k == 2
    assert aa[0].length == pytest.approx(8.0)
    assert set(ref_spectrum.primitive_lengths) <= set(ref_spectrum.lengths)


def test_reference_spectrum_is_sorted_and_certified(ref_spectrum):
    assert ref_spectrum.certified
    assert np.all(np.diff(ref_spectrum.lengths) >= 0)
    assert ref_spectrum.lengths.max() <= REFERENCE_CUTOFF
    assert ref_spectrum.distinct_length_count() >= 20


def test_level_counts_without_pruning(ref_group):
    spec = enumerate_spectrum(ref_group, 5.0, EnumerationLimits(max_word_length=5), prune=False)
    assert spec.stats.visited_per_level == tuple(4 * 3 ** (m - 1) for m in range(1, 6))
    assert spec.stats.words_visited == sum(spec.stats.visited_per_level)


def test_pruning_does_not_change_classes(ref_group):
    limits = EnumerationLimits(max_word_length=6)
    pruned = enumerate_spectrum(ref_group, 10.0, limits)
    full = enumerate_spectrum(ref_group, 10.0, limits, prune=False)
    assert [e.canonical_word for e in pruned.entries] == [e.canonical_word for e in full.entries]
    assert pruned.stats.words_visited < full.stats.words_visited


def test_parallel_enumeration_is_identical(ref_group):
    one = enumerate_spectrum(ref_group, 12.0, EnumerationLimits(workers=1))
    two = enumerate_spectrum(ref_group, 12.0, EnumerationLimits(workers=2))
    assert [e.canonical_word for e in one.entries] == [e.canonical_word for e in two.entries]
    assert np.array_equal(one.lengths, two.lengths)


def test_word_length_limit_leaves_spectrum_uncertified(ref_group):
    spec = enumerate_spectrum(ref_group, 24.0, EnumerationLimits(max_word_length=3))
    assert not spec.certified
    assert spec.stats.guaranteed_cutoff < 24.0


def test_node_limit_raises_with_partial_result(ref_group):
    with pytest.raises(ResourceExceeded) as exc:
        enumerate_spectrum(ref_group, 24.0, EnumerationLimits(max_level_nodes=8))
    assert not exc.value.partial.certified


def test_orbit_displacements(ref_group):
    data = orbit_displacements(ref_group, 8.0)
    assert data.complete
    assert data.displacements[0] == 0.0
    assert np.all(np.diff(data.displacements) >= 0)
    # the four generators and their inverses move the origin by exactly 4
    assert np.sum(np.isclose(data.displacements, 4.0)) == 4


def test_counting_function(ref_group):
    spec = enumerate_spectrum(ref_group, SHORT_CUTOFF)
    table = counting_function(spec, [3.0, 5.0, SHORT_CUTOFF])
    assert list(table.columns) == ["T", "N", "N_p", "N_unoriented"]
    assert table["N"].tolist() == [0, 4, 8]
    assert table["N_unoriented"].tolist() == [0.0, 2.0, 4.0]
    with pytest.raises(CutoffExceeded):
        counting_function(spec, [SHORT_CUTOFF + 1.0])
    with pytest.raises(CutoffExceeded):
        spec.truncated(SHORT_CUTOFF + 1.0)
    assert len(spec.truncated(5.0).entries) == 4


def test_arithmeticity():
    verdict = non_arithmeticity_check(make_spectrum([1.0, 2.0, 3.0, 5.0]))
    assert verdict.verdict == "inconclusive"
    assert verdict.mixing is None
    verdict = non_arithmeticity_check(make_spectrum([1.0, math.sqrt(2.0)]))
    assert verdict.verdict == "non_arithmetic_witness"
    assert verdict.witness == ("a", "b")
    assert verdict.mixing is True
    with pytest.raises(TooFewGeodesics):
        non_arithmeticity_check(make_spectrum([1.0]))


def test_spectrum_file_round_trip(ref_group, tmp_path):
    spec = enumerate_spectrum(ref_group, 12.0)
    path = str(tmp_path / "ref.csv")
    save_spectrum(spec, path)
    back = load_spectrum(path, ref_group)
    assert back.certified and back.cutoff == spec.cutoff
    assert [e.canonical_word for e in back.entries] == [e.canonical_word for e in spec.entries]
    assert np.array_equal(back.lengths, spec.lengths)
    assert back.certificate == spec.certificate
    assert back.stats.visited_per_level == spec.stats.visited_per_level
    with pytest.raises(DigestMismatch):
        load_spectrum(path, reference_group(5.0))


def test_spectrum_file_format_errors(tmp_path):
    with pytest.raises(FormatError):
        spectrum_from_text("canonical_word,length\na,1\n")
    text = spectrum_to_text(make_spectrum([1.0, 2.0]))
    with pytest.raises(FormatError):
        spectrum_from_text(text.replace("#certified true", "#certified maybe"))
    with pytest.raises(FormatError):
        spectrum_from_text(text.replace("#cutoff", "#cut"))
    with pytest.raises(FormatError):
        load_spectrum(str(tmp_path / "nope.csv"))


def test_surface_determinant_closed_form(ref_group, ref_spectrum):
    for e in ref_spectrum.truncated(14.0).primitives():
        m = ref_group.word_matrix(e.primitive_word)
        for k in range(1, 6):
            assert det_I_minus_Pk(m, k) == pytest.approx(4.0 * math.sinh(k * e.length / 2.0) ** 2, rel=1e-10)
