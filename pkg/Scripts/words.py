"""
Free-group words as strings.

Generator i (1-based) is the i-th lowercase letter, its inverse the matching
uppercase letter. Letters are ordered a < A < b < B < ...; that order fixes
which cyclic rotation is the canonical representative of a conjugacy class.
"""

from __future__ import annotations

import string
from typing import Iterable, Iterator, Tuple

from .errors import EmptyWord

Word = str

MAX_RANK = 26

_RANK_TABLE = str.maketrans(
    {ch: chr(0x100 + 2 * i) for i, ch in enumerate(string.ascii_lowercase)}
    | {ch: chr(0x101 + 2 * i) for i, ch in enumerate(string.ascii_uppercase)}
)


def letter_char(index: int) -> str:
    """Letter for a 0-based alphabet index (2g -> generator g, 2g+1 -> its inverse)."""
    ch = string.ascii_lowercase[index // 2]
    return ch.upper() if index & 1 else ch


def letter_index(ch: str) -> int:
    return 2 * (ord(ch.lower()) - ord("a")) + (1 if ch.isupper() else 0)


def alphabet(rank: int) -> str:
    return "".join(letter_char(i) for i in range(2 * rank))


def word_from_letters(letters: Iterable[int]) -> Word:
    """(1, -2, 1) -> 'aBa'."""
    out = []
    for x in letters:
        if x == 0 or abs(x) > MAX_RANK:
            raise ValueError(f"letter {x} outside the alphabet")
        ch = string.ascii_lowercase[abs(x) - 1]
        out.append(ch if x > 0 else ch.upper())
    return "".join(out)


def word_letters(w: Word) -> Tuple[int, ...]:
    return tuple((ord(ch.lower()) - ord("a") + 1) * (-1 if ch.isupper() else 1) for ch in w)


def inverse(w: Word) -> Word:
    return w[::-1].swapcase()


def reduce_word(w: Word) -> Word:
    out = []
    for ch in w:
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def is_reduced(w: Word) -> bool:
    return all(w[i] != w[i + 1].swapcase() for i in range(len(w) - 1))


def is_cyclically_reduced(w: Word) -> bool:
    return is_reduced(w) and (len(w) <= 1 or w[0] != w[-1].swapcase())


def cyclic_reduce(w: Word) -> Word:
    w = reduce_word(w)
    i, j = 0, len(w)
    while j - i > 1 and w[i] == w[j - 1].swapcase():
        i += 1
        j -= 1
    return w[i:j]


def rank_key(w: Word) -> str:
    """Sort key realising the a < A < b < B letter order."""
    return w.translate(_RANK_TABLE)


def _min_rotation(w: Word) -> Word:
    key = rank_key(w)
    n = len(w)
    best = min(range(n), key=lambda i: key[i:] + key[:i])
    return w[best:] + w[:best]


def canonical_form(w: Word) -> Word:
    w = cyclic_reduce(reduce_word(w))
    if not w:
        raise EmptyWord("the trivial word has no conjugacy class representative")
    return _min_rotation(w)


def is_canonical(w: Word) -> bool:
    """True when w is cyclically reduced and already its own canonical rotation."""
    if not w or not is_cyclically_reduced(w):
        return False
    key = rank_key(w)
    return all(key <= key[i:] + key[:i] for i in range(1, len(w)))


def primitive_root(w: Word) -> Tuple[Word, int]:
    if not w:
        raise EmptyWord("the trivial word has no primitive root")
    n = len(w)
    # w is a proper power iff it occurs inside w+w away from the ends
    i = (w + w).find(w, 1)
    if 0 < i < n:
        return w[:i], n // i
    return w, 1


def reduced_words(rank: int, length: int) -> Iterator[Word]:
    """Every reduced word of the given length, in alphabet order."""
    letters = alphabet(rank)
    if length == 0:
        yield ""
        return
    for prefix in reduced_words(rank, length - 1):
        for ch in letters:
            if not prefix or prefix[-1] != ch.swapcase():
                yield prefix + ch
