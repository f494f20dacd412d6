import math
import os
import string
import sys

import numpy as np
import pytest
from scipy.special import lambertw

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from Scripts.console import set_quiet  # noqa: E402
from Scripts.schottky import (ClosedGeodesic, EnumerationLimits, LengthSpectrum,  # noqa: E402
                              enumerate_spectrum, reference_group)

GROUPS_DIR = os.path.join(ROOT, "groups")
REFERENCE_JSON = os.path.join(GROUPS_DIR, "reference.json")
REFERENCE_CUTOFF = 36.0
PLANTED_RATE = 0.8


def fake_word(i: int) -> str:
    """Distinct lowercase labels: 0 -> 'a', 25 -> 'z', 26 -> 'ba', ..."""
    out = ""
    i += 1
    while i > 0:
        i, r = divmod(i - 1, 26)
        out = string.ascii_lowercase[r] + out
    return out


def planted_lengths(count: int, rate: float = PLANTED_RATE) -> np.ndarray:
    """Lengths with N(T_n) = n = e^{rate T_n} / (rate T_n) exactly (n >= 3)."""
    n = np.arange(1, count + 1, dtype=float)
    t = np.full(n.shape, 1.25)
    big = n >= 3
    t[big] = -lambertw(-1.0 / n[big], k=-1).real / rate
    return np.maximum(t, 1.25)


def make_spectrum(lengths, ks=None, certified=True, cutoff=None, model_dim=2) -> LengthSpectrum:
    lengths = np.asarray(lengths, dtype=float)
    ks = np.ones(lengths.size, dtype=int) if ks is None else np.asarray(ks, dtype=int)
    entries = []
    for i, (ell, k) in enumerate(zip(lengths, ks)):
        root = fake_word(i)
        entries.append(ClosedGeodesic(root * int(k), root, int(k), float(ell), float(ell) / int(k)))
    entries.sort(key=lambda e: e.length)
    cutoff = float(lengths.max()) if cutoff is None else float(cutoff)
    return LengthSpectrum(tuple(entries), cutoff, certified, "planted", model_dim)


@pytest.fixture(autouse=True)
def _quiet_console():
    set_quiet(True)
    yield
    set_quiet(False)


@pytest.fixture(scope="session")
def ref_group():
    return reference_group(4.0)


@pytest.fixture(scope="session")
def ref_spectrum(ref_group):
    set_quiet(True)
    return enumerate_spectrum(ref_group, REFERENCE_CUTOFF, EnumerationLimits())


@pytest.fixture(scope="session")
def planted():
    return make_spectrum(planted_lengths(4000))
