import pytest

from Scripts import words as W
from Scripts.errors import EmptyWord


def test_letter_order_and_indices():
    assert W.alphabet(2) == "aAbB"
    assert [W.letter_index(ch) for ch in "aAbB"] == [0, 1, 2, 3]
    assert sorted(["B", "a", "b", "A"], key=W.rank_key) == ["a", "A", "b", "B"]


def test_letters_conversion():
    assert W.word_from_letters((1, -2, 1)) == "aBa"
    assert W.word_letters("aBa") == (1, -2, 1)
    with pytest.raises(ValueError):
        W.word_from_letters((0,))


def test_reduce_and_inverse():
    assert W.reduce_word("aAb") == "b"
    assert W.reduce_word("abBA") == ""
    assert W.inverse("aB") == "bA"
    assert W.reduce_word("aB" + W.inverse("aB")) == ""
    assert W.cyclic_reduce("bab" + "B") == "ba"


def test_cyclic_reduce_cancels_inside_before_trimming_ends():
    assert W.cyclic_reduce("aBbbA") == "b"
    assert W.cyclic_reduce("bAaB") == ""
    assert W.cyclic_reduce("abBaB") == "aaB"


def test_canonical_form_picks_least_rotation():
    assert W.canonical_form("ba") == "ab"
    assert W.canonical_form("Ba") == "aB"
    assert W.canonical_form("Aab") == "b"
    assert W.is_canonical("ab")
    assert not W.is_canonical("ba")
    assert not W.is_canonical("aA")


def test_trivial_word_has_no_class():
    with pytest.raises(EmptyWord):
        W.canonical_form("aA")
    with pytest.raises(EmptyWord):
        W.primitive_root("")


def test_canonical_form_is_conjugation_invariant():
    for m in range(1, 5):
        for w in W.reduced_words(2, m):
            if not W.is_cyclically_reduced(w):
                continue
            for g in ("b", "aB", "BBa"):
                conj = g + w + W.inverse(g)
                assert W.canonical_form(conj) == W.canonical_form(w)


def test_primitive_root():
    assert W.primitive_root("abab") == ("ab", 2)
    assert W.primitive_root("aaa") == ("a", 3)
    assert W.primitive_root("aba") == ("aba", 1)


def test_reduced_word_counts():
    for m in range(1, 6):
        assert sum(1 for _ in W.reduced_words(2, m)) == 4 * 3 ** (m - 1)
