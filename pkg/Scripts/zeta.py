"""
Zeta functions over a truncated length spectrum.

All three families are exponentials of a double sum over primitive classes
gamma_p and powers k:

  selberg   sum_k e^{-k s l_p} / k                      = -log(1 - e^{-s l_p})
  weighted  sum_k e^{-k s l_p + k U_p} / k              = -log(1 - e^{-s l_p + U_p})
  gn        sum_k e^{-k s l_p} / (k sqrt|det(I - P^k)|)   summed term by term

Evaluation is refused within `margin` of the abscissa of convergence. The
tail bound covers the classes beyond the cutoff using a counting constant
fitted on the data with a factor-2 allowance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd

from .console import log_detail, log_warning
from .errors import (AbscissaTooClose, InsufficientData, ModelUnsupported, NegativePressureWindow,
                     NoSignChange, NotCertified)
from .moebius import log_det_I_minus_Pk, log_weight_ratio
from .schottky import LengthSpectrum
from .thermo import WeightTable, cumulative_sums, entropy, shell_growth

DEFAULT_MARGIN = 0.1
K_SERIES_MAX = 400
FAMILIES = ("selberg", "weighted", "gn")


@dataclass(frozen=True)
class ZetaEvaluation:
    s: complex
    value: complex
    log_value: complex
    cutoff: float
    tail_bound: float
    family: str
    abscissa: float
    series_remainder: float = 0.0


@dataclass(frozen=True)
class _Primitives:
    lengths: np.ndarray
    hyperbolic: np.ndarray
    thetas: np.ndarray
    words: Tuple[str, ...]


def _primitives(spectrum: LengthSpectrum) -> _Primitives:
    prims = spectrum.primitives()
    lengths = np.array([e.length for e in prims], dtype=float)
    return _Primitives(lengths, lengths / spectrum.length_scale,
                       np.array([e.theta_p for e in prims], dtype=float),
                       tuple(e.canonical_word for e in prims))


def _check_domain(spectrum: LengthSpectrum, s: complex, abscissa: float, margin: float, force: bool) -> None:
    if not spectrum.certified and not force:
        raise NotCertified("zeta evaluation needs a certified spectrum (or force=True)")
    if margin < 0:
        raise ValueError("margin must be >= 0")
    safe = abscissa + margin
    if not s.real > safe:
        raise AbscissaTooClose(f"Re(s) = {s.real:.6g} is within {margin:g} of the abscissa "
                               f"{abscissa:.6g}; evaluate at Re(s) > {safe:.6g}", safe_abscissa=safe)


def _tail_bound(lengths: np.ndarray, weights: np.ndarray, rate: float, sigma: float,
                cutoff: float, prefactor: float = 1.0) -> float:
    """Bound on the log-sum over classes longer than cutoff, given S(t) <= C e^{rate t}."""
    if lengths.size == 0 or not sigma > rate:
        return math.inf
    cum = cumulative_sums(lengths, weights, lengths)
    c = 2.0 * float(np.max(cum * np.exp(-rate * lengths)))
    b = prefactor * sigma * c * math.exp((rate - sigma) * cutoff) / (sigma - rate)
    return b / (1.0 - b) if b < 1.0 else math.inf


def _closed_form_log_sum(prims: _Primitives, s: complex, u: np.ndarray) -> complex:
    x = np.exp(-s * prims.lengths + u)
    return complex(np.sum(-np.log1p(-x)))


def _resolve_abscissa(spectrum: LengthSpectrum, abscissa: Optional[float], force: bool) -> float:
    if abscissa is not None:
        return float(abscissa)
    return entropy(spectrum, force=force).value


def _weighted(spectrum: LengthSpectrum, s: complex, u_prims: np.ndarray, abscissa: float,
              margin: float, force: bool, family: str) -> ZetaEvaluation:
    s = complex(s)
    _check_domain(spectrum, s, abscissa, margin, force)
    prims = _primitives(spectrum)
    log_z = _closed_form_log_sum(prims, s, u_prims)
    tail = _tail_bound(prims.lengths, np.exp(u_prims), abscissa, s.real, spectrum.cutoff)
    return ZetaEvaluation(s, complex(np.exp(log_z)), log_z, spectrum.cutoff, tail, family, abscissa)


def selberg_zeta(spectrum: LengthSpectrum, s: complex, abscissa: Optional[float] = None,
                 margin: float = DEFAULT_MARGIN, force: bool = False) -> ZetaEvaluation:
    """Z(s) as the exponential of its log-sum; abscissa defaults to the entropy estimate."""
    h = _resolve_abscissa(spectrum, abscissa, force)
    u = np.zeros(len(spectrum.primitives()))
    return _weighted(spectrum, s, u, h, margin, force, "selberg")


def selberg_euler_product(spectrum: LengthSpectrum, s: complex) -> complex:
    """Z(s) as the finite product of (1 - e^{-s l_p})^{-1}; no domain checks."""
    x = np.exp(-complex(s) * _primitives(spectrum).lengths)
    return complex(np.prod(1.0 / (1.0 - x)))


def _primitive_weights(spectrum: LengthSpectrum, weights: WeightTable) -> np.ndarray:
    return np.array([weights[e.canonical_word] for e in spectrum.primitives()], dtype=float)


def weighted_zeta(spectrum: LengthSpectrum, weights: WeightTable, s: complex,
                  abscissa: Optional[float] = None, margin: float = DEFAULT_MARGIN,
                  force: bool = False) -> ZetaEvaluation:
    """Z_U(s); abscissa defaults to the pressure estimate of the weights."""
    u = _primitive_weights(spectrum, weights)
    if abscissa is None:
        from .thermo import pressure
        abscissa = pressure(spectrum, weights, force=force).value
    return _weighted(spectrum, s, u, float(abscissa), margin, force, "weighted")


def gn_abscissa(spectrum: LengthSpectrum, force: bool = False) -> float:
    """Pressure of -W_SBR/2, which is h - n/2 in constant curvature."""
    n = spectrum.model_dim - 1
    return entropy(spectrum, force=force).value - 0.5 * n / spectrum.length_scale


def _gn_log_sum(prims: _Primitives, s: complex, n: int, model_dim: int) -> Tuple[complex, float]:
    """The k-series of log Z_gn over the primitive classes and a bound on the terms past its cap."""
    if prims.lengths.size == 0:
        return 0j, 0.0
    rates = s.real * prims.lengths + 0.5 * n * prims.hyperbolic
    rate = float(np.min(rates))
    if not rate > 0:
        raise AbscissaTooClose(f"k-series diverges at Re(s) = {s.real:.6g}")
    k_max = min(K_SERIES_MAX, max(1, math.ceil(40.0 / rate)))
    ks = np.arange(1, k_max + 1, dtype=float)[None, :]
    half_log_det = 0.5 * log_det_I_minus_Pk(prims.hyperbolic[:, None], prims.thetas[:, None], ks, model_dim)
    terms = np.exp(-s * ks * prims.lengths[:, None] - half_log_det) / ks
    # sum over k > k_max of pref e^{-k r} / k
    pref = (-np.expm1(-prims.hyperbolic)) ** (-n)
    remainder = pref * np.exp(-(k_max + 1) * rates) / ((k_max + 1) * -np.expm1(-rates))
    return complex(np.sum(terms)), float(np.sum(remainder))


def gn_zeta(spectrum: LengthSpectrum, s: complex, abscissa: Optional[float] = None,
            margin: float = DEFAULT_MARGIN, force: bool = False) -> ZetaEvaluation:
    s = complex(s)
    absc = gn_abscissa(spectrum, force) if abscissa is None else float(abscissa)
    _check_domain(spectrum, s, absc, margin, force)
    n = spectrum.model_dim - 1
    prims = _primitives(spectrum)
    log_z, remainder = _gn_log_sum(prims, s, n, spectrum.model_dim)
    if prims.lengths.size:
        shift = 0.5 * n / spectrum.length_scale
        lmin = float(np.min(prims.hyperbolic))
        prefactor = (-math.expm1(-lmin)) ** (-n)
        tail = _tail_bound(prims.lengths, np.ones(prims.lengths.size), absc + shift,
                           s.real + shift, spectrum.cutoff, prefactor) + remainder
    else:
        tail = math.inf
    return ZetaEvaluation(s, complex(np.exp(log_z)), log_z, spectrum.cutoff, tail, "gn", absc, remainder)


# ---------------------------------------------------------------------------
# Closeness of the determinant weights to e^{-n l / 2}
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosenessComparison:
    log_difference: complex
    bound: float


def gn_closeness_log(spectrum: LengthSpectrum, s: complex) -> ClosenessComparison:
    """
    log Z_gn(s) - log Z_U(s) for U = -W_SBR/2, together with the bound
    sum over all classes of e^{-Re(s) l} w |r| / k.
    """
    s = complex(s)
    n = spectrum.model_dim - 1
    prims = _primitives(spectrum)
    u = -0.5 * n * prims.hyperbolic
    series, remainder = _gn_log_sum(prims, s, n, spectrum.model_dim)
    diff = series - _closed_form_log_sum(prims, s, u)

    entries = spectrum.entries
    ks = np.array([e.k for e in entries], dtype=float)
    ell_p = np.array([e.primitive_length for e in entries], dtype=float) / spectrum.length_scale
    theta = np.array([e.theta_p for e in entries], dtype=float)
    lengths = spectrum.lengths
    r = np.expm1(log_weight_ratio(ell_p, theta, ks, spectrum.model_dim))
    w = np.exp(-0.5 * n * ks * ell_p)
    bound = float(np.sum(np.exp(-s.real * lengths) * w * np.abs(r) / ks)) if entries else 0.0
    return ClosenessComparison(diff, bound + remainder)


@dataclass(frozen=True)
class ClosenessReport:
    table: pd.DataFrame
    constant: float
    closed_form: bool


def weight_closeness_report(spectrum: LengthSpectrum, allow_numeric: bool = False) -> ClosenessReport:
    """
    r(gamma) = p(gamma)/w(gamma) - 1 for every class, with the realised constant
    C = max r e^{l} and the bound column C e^{-l}.
    """
    closed_form = spectrum.model_dim == 2
    if not closed_form and not allow_numeric:
        raise ModelUnsupported("the closed form for r(gamma) holds on surfaces only; "
                               "pass allow_numeric=True for the numerical 3-space values")
    entries = spectrum.entries
    ell = spectrum.lengths / spectrum.length_scale
    if closed_form:
        r = np.exp(-ell) / -np.expm1(-ell)
    else:
        ks = np.array([e.k for e in entries], dtype=float)
        ell_p = np.array([e.primitive_length for e in entries], dtype=float) / spectrum.length_scale
        theta = np.array([e.theta_p for e in entries], dtype=float)
        r = np.expm1(log_weight_ratio(ell_p, theta, ks, spectrum.model_dim))
        log_warning("3-space closeness values are numerical (no closed form)")
    c = float(np.max(r * np.exp(ell))) if len(entries) else 0.0
    table = pd.DataFrame({
        "canonical_word": [e.canonical_word for e in entries],
        "length": spectrum.lengths,
        "r": r,
        "bound": c * np.exp(-ell),
    })
    return ClosenessReport(table, c, closed_form)


# ---------------------------------------------------------------------------
# Pole location
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoleLocation:
    estimate: float
    bracket: Tuple[float, float]
    family: str
    abscissa_estimate: Optional[float] = None
    notes: str = ""


def _family_weights(spectrum: LengthSpectrum, family: str, weights: Optional[WeightTable]) -> np.ndarray:
    prims = _primitives(spectrum)
    if family == "selberg":
        return np.ones(prims.lengths.size)
    if family == "weighted":
        if weights is None:
            raise ValueError("the weighted family needs a weight table")
        return np.exp(_primitive_weights(spectrum, weights))
    if family == "gn":
        return np.exp(-0.5 * log_det_I_minus_Pk(prims.hyperbolic, prims.thetas, 1, spectrum.model_dim))
    raise ValueError(f"unknown zeta family '{family}' (expected one of {FAMILIES})")


def pole_diagnostic(spectrum: LengthSpectrum, family: str = "selberg",
                    weights: Optional[WeightTable] = None) -> Callable[[float], float]:
    """g(s): log-growth rate of the shell sums of e^{-s l} times the family weight."""
    prims = _primitives(spectrum)
    if prims.lengths.size < 2:
        raise InsufficientData("need at least two primitive classes to locate a pole")
    base = _family_weights(spectrum, family, weights)

    def g(s: float) -> float:
        # rescaled by e^{s T} so the shells stay representable
        scaled = base * np.exp(-s * (prims.lengths - spectrum.cutoff))
        return shell_growth(prims.lengths, scaled, spectrum.cutoff)[0]

    return g


def locate_pole(spectrum: LengthSpectrum, family: str = "selberg", interval: Tuple[float, float] = (0.0, 2.0),
                weights: Optional[WeightTable] = None, resolution: float = 1e-3,
                cross_check: bool = True) -> PoleLocation:
    """Bisection on the sign change of pole_diagnostic over a real interval."""
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError(f"empty search interval [{lo}, {hi}]")
    g = pole_diagnostic(spectrum, family, weights)
    g_lo, g_hi = g(lo), g(hi)
    if not (g_lo > 0 > g_hi):
        raise NoSignChange(f"diagnostic does not change sign on [{lo:g}, {hi:g}] "
                           f"(g = {g_lo:.4g}, {g_hi:.4g})")
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid

    abscissa = None
    notes = "shell-sum growth bisection"
    if cross_check:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NegativePressureWindow)
                if family == "selberg":
                    abscissa = entropy(spectrum, force=True).value
                elif family == "gn":
                    abscissa = gn_abscissa(spectrum, force=True)
                elif weights is not None:
                    from .thermo import pressure
                    abscissa = pressure(spectrum, weights, force=True).value
        except InsufficientData as e:
            notes += f"; no independent estimate ({e})"
    log_detail(f"{family} pole bracket [{lo:.4f}, {hi:.4f}]")
    return PoleLocation(0.5 * (lo + hi), (lo, hi), family, abscissa, notes)


# ---------------------------------------------------------------------------
# Prime orbit counting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrimeOrbitCheck:
    table: pd.DataFrame
    rate: float
    variant: str
    final_ratio: float
    second_quarter_distance: float
    top_quarter_distance: float

    @property
    def toward_one(self) -> bool:
        return self.top_quarter_distance < self.second_quarter_distance

    def within(self, lo: float, hi: float) -> bool:
        return lo <= self.final_ratio <= hi


def prime_orbit_check(spectrum: LengthSpectrum, h: float, variant: str = "plain",
                      weights: Optional[WeightTable] = None, grid_points: int = 41,
                      force: bool = False) -> PrimeOrbitCheck:
    """
    Ratio of the (weighted) count to e^{hT}/(hT) along a T grid.

    plain     N_p(T)
    weighted  sum of e^{U(gamma)} over classes of length <= T
    gn        sum of |det(I - P_gamma)|^{-1/2} over classes of length <= T
    """
    if not spectrum.certified and not force:
        raise NotCertified("prime orbit check needs a certified spectrum (or force=True)")
    if not h > 0:
        raise InsufficientData(f"growth rate must be positive, got {h}")
    if len(spectrum.entries) < 2:
        raise InsufficientData("need at least two closed geodesics")

    if variant == "plain":
        lengths = spectrum.primitive_lengths
        w = np.ones(lengths.size)
    elif variant == "weighted":
        if weights is None:
            raise ValueError("the weighted variant needs a weight table")
        lengths = spectrum.lengths
        w = np.exp(weights.array_for(spectrum))
    elif variant == "gn":
        lengths = spectrum.lengths
        ell_p = np.array([e.primitive_length for e in spectrum.entries]) / spectrum.length_scale
        theta = np.array([e.theta_p for e in spectrum.entries])
        w = np.exp(-0.5 * log_det_I_minus_Pk(ell_p, theta, spectrum.ks, spectrum.model_dim))
    else:
        raise ValueError(f"unknown variant '{variant}'")

    grid = np.linspace(float(np.min(spectrum.lengths)), spectrum.cutoff, grid_points)
    counts = cumulative_sums(lengths, w, grid)
    ratio = counts * h * grid * np.exp(-h * grid)
    q = grid_points // 4
    dist = np.abs(ratio - 1.0)
    table = pd.DataFrame({"T": grid, "count": counts, "ratio": ratio})
    return PrimeOrbitCheck(table, float(h), variant, float(ratio[-1]),
                           float(np.mean(dist[q:2 * q])), float(np.mean(dist[-q:])))
