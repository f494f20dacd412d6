"""
Thermodynamic quantities read off periodic-orbit and orbit-counting data.

Growth rates are estimated on a declared finite window. For a spectrum with
cutoff T and shortest length l0, the window is the top half [(l0+T)/2, T] of
the range. Inside it the estimator fits log(t * S(t)) = p t - log p by least
squares in the single rate p, where S is the cumulative (weighted) count; this
is the prime-orbit asymptotic S(t) ~ e^{pt}/(pt) with its unit constant. The
linear slope of the same curve and a two-point ratio over the last quarter
window are cross-checks. The reported uncertainty is the largest of the fit's
standard error, the drift of the fit over the top half of the window and the
slope-ratio gap.

Weighted sums are fitted after tilting the weights by e^{s l} until their rate
matches the unweighted one, where the fitted form is calibrated.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize_scalar
from scipy.stats import linregress

from .console import log_detail, log_warning
from .errors import (BadPinching, InsufficientData, ModelUnsupported, NegativePressureWindow,
                     NotCertified, QuadratureNonconvergent, WeightMissing)
from .moebius import axis
from .potentials import PotentialKind, PotentialSpec
from .schottky import (ClosedGeodesic, EnumerationLimits, LengthSpectrum, SchottkyGroup,
                       orbit_displacements)

WEIGHT_COLUMNS = ["canonical_word", "U"]
MIN_DISTINCT_LENGTHS = 20
GRID_POINTS = 64
GL_ORDER = 16
MAX_DOUBLINGS = 6
FIT_BOUNDS = (1e-6, 50.0)
MAX_TILTS = 20
TILT_TOL = 1e-6


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------

def _axis_integral(potential: PotentialSpec, ax, length: float, nodes_per_unit: int) -> float:
    panels = max(1, math.ceil(nodes_per_unit * length / GL_ORDER))
    x, w = leggauss(GL_ORDER)
    edges = np.linspace(0.0, length, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    z, h = ax(t)
    values = potential.evaluate(np.real(z), h)
    if not np.all(np.isfinite(values)):
        raise QuadratureNonconvergent("potential is not finite along the axis")
    return float(np.sum(weights * values))


def weight(potential: PotentialSpec, geodesic: ClosedGeodesic, group: Optional[SchottkyGroup] = None,
           nodes_per_unit: int = 32, tol: float = 1e-8) -> float:
    """U(gamma): the integral of the potential once around the closed geodesic."""
    model_dim = group.model_dim if group is not None else 2
    return _weight_with_error(potential, geodesic, group, model_dim, nodes_per_unit, tol)[0]


def _weight_with_error(potential, geodesic, group, model_dim, nodes_per_unit, tol, axis_cache=None):
    if potential.kind is PotentialKind.CONSTANT:
        return potential.value * geodesic.length, 0.0
    if potential.kind is PotentialKind.SBR:
        return potential.value * (model_dim - 1) * geodesic.length, 0.0
    if group is None:
        raise ValueError("expression potentials need the group to locate geodesic axes")
    if group.model_dim != 2:
        raise ModelUnsupported("expression potentials are defined on the upper half-plane only")

    root = geodesic.primitive_word
    if axis_cache is not None and root in axis_cache:
        ax = axis_cache[root]
    else:
        ax = axis(group.word_matrix(root))
        if axis_cache is not None:
            axis_cache[root] = ax
    ell = ax.length.ell
    nodes = nodes_per_unit
    prev = _axis_integral(potential, ax, ell, nodes)
    for _ in range(MAX_DOUBLINGS):
        nodes *= 2
        cur = _axis_integral(potential, ax, ell, nodes)
        err = abs(cur - prev)
        if err <= tol * max(1.0, abs(cur)):
            return geodesic.k * cur, geodesic.k * err
        prev = cur
    raise QuadratureNonconvergent(f"axis integral for '{root}' did not settle after {MAX_DOUBLINGS} doublings")


@dataclass(frozen=True)
class WeightTable:
    values: Dict[str, float]
    potential: str
    nodes_per_unit: int = 32
    quadrature_error: float = 0.0

    def __getitem__(self, word: str) -> float:
        try:
            return self.values[word]
        except KeyError:
            raise WeightMissing(f"no weight for class '{word}'") from None

    def __len__(self) -> int:
        return len(self.values)

    def array_for(self, spectrum: LengthSpectrum) -> np.ndarray:
        missing = [e.canonical_word for e in spectrum.entries if e.canonical_word not in self.values]
        if missing:
            raise WeightMissing(f"{len(missing)} classes have no weight (first: '{missing[0]}')")
        return np.array([self.values[e.canonical_word] for e in spectrum.entries], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"canonical_word": list(self.values), "U": list(self.values.values())},
                            columns=WEIGHT_COLUMNS)


def build_weight_table(potential: PotentialSpec, spectrum: LengthSpectrum,
                       group: Optional[SchottkyGroup] = None, nodes_per_unit: int = 32,
                       tol: float = 1e-8) -> WeightTable:
    cache: Dict[str, object] = {}
    values: Dict[str, float] = {}
    worst = 0.0
    for e in spectrum.entries:
        u, err = _weight_with_error(potential, e, group, spectrum.model_dim,
                                    nodes_per_unit, tol, cache)
        values[e.canonical_word] = u
        worst = max(worst, err)
    if worst:
        log_detail(f"weights: {len(values)} classes, worst quadrature change {worst:.2e}")
    return WeightTable(values, potential.describe(), nodes_per_unit, worst)


def save_weights(table: WeightTable, path: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    table.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def load_weights(path: str, potential: str = "") -> WeightTable:
    df = pd.read_csv(path, dtype={"canonical_word": str}, keep_default_na=False,
                     float_precision="round_trip")
    if list(df.columns) != WEIGHT_COLUMNS:
        raise WeightMissing(f"{path}: expected columns {WEIGHT_COLUMNS}, got {list(df.columns)}")
    return WeightTable(dict(zip(df["canonical_word"], df["U"].astype(float))), potential or path)


# ---------------------------------------------------------------------------
# Growth-rate estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PressureEstimate:
    value: float
    slope: float
    ratio: float
    uncertainty: float
    window: Tuple[float, float]
    method: str = "fit"
    tilt: float = 0.0
    estimator: str = "cumulative"
    nonpositive: bool = False

    @property
    def methods(self) -> Dict[str, float]:
        return {self.method: self.value, "slope": self.slope, "ratio": self.ratio}


def _window(lengths: np.ndarray, cutoff: float) -> Tuple[float, float]:
    lo = float(np.min(lengths))
    return 0.5 * (lo + cutoff), float(cutoff)


def _fit(grid: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """(slope, stderr, ratio) of y against grid."""
    fit = linregress(grid, y)
    span = grid[-1] - grid[0]
    j = int(np.searchsorted(grid, grid[-1] - span / 4.0))
    j = min(j, len(grid) - 2)
    ratio = (y[-1] - y[j]) / (grid[-1] - grid[j])
    return float(fit.slope), float(fit.stderr), float(ratio)


def _orbit_rate(grid: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Rate p of y = p t - log p, the log of t e^{pt}/(pt), with its standard error."""
    def rss(p: float) -> float:
        return float(np.sum((y - p * grid + math.log(p)) ** 2))

    res = minimize_scalar(rss, bounds=FIT_BOUNDS, method="bounded", options={"xatol": 1e-10})
    p = float(res.x)
    spread = float(np.sum((grid - 1.0 / p) ** 2))
    stderr = math.sqrt(float(res.fun) / max(len(grid) - 1, 1) / spread) if spread > 0 else math.inf
    return p, stderr


def cumulative_sums(lengths: np.ndarray, weights: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """S(t) = sum of weights with length <= t, for each t in grid."""
    order = np.argsort(lengths, kind="stable")
    csum = np.concatenate([[0.0], np.cumsum(weights[order])])
    idx = np.searchsorted(lengths[order], grid, side="right")
    return csum[idx]


def shell_sums(lengths: np.ndarray, weights: np.ndarray, grid: np.ndarray, width: float) -> np.ndarray:
    """Sum of the weights with length in (t - width, t], each shell summed on its own."""
    order = np.argsort(lengths, kind="stable")
    x = lengths[order]
    w = weights[order]
    hi = np.searchsorted(x, grid, side="right")
    lo = np.searchsorted(x, grid - width, side="right")
    return np.array([w[a:b].sum() for a, b in zip(lo, hi)], dtype=float)


def shell_growth(lengths: np.ndarray, weights: np.ndarray, cutoff: float) -> Tuple[float, float, float]:
    """(slope, stderr, ratio) for log(t * shell(t)), shells one quarter window wide."""
    t0, t1 = _window(lengths, cutoff)
    width = (t1 - t0) / 4.0
    grid = np.linspace(t0 + width, t1, GRID_POINTS)
    shell = shell_sums(lengths, weights, grid, width)
    if not np.all(np.isfinite(shell)):
        raise InsufficientData("shell sums overflow inside the window")
    if np.any(shell <= 0):
        raise InsufficientData("shell sums vanish inside the window")
    return _fit(grid, np.log(grid * shell))


def _fit_window(lengths: np.ndarray, weights: np.ndarray, cutoff: float) -> PressureEstimate:
    t0, t1 = _window(lengths, cutoff)
    grid = np.linspace(t0, t1, GRID_POINTS)
    s = cumulative_sums(lengths, weights, grid)
    if not np.all(np.isfinite(s)):
        raise InsufficientData("weighted sums overflow inside the window")
    if np.any(s <= 0):
        raise InsufficientData(f"no weighted orbits below T={t0:.4g}; the window is empty")
    y = np.log(grid * s)
    rate, rate_err = _orbit_rate(grid, y)
    half = GRID_POINTS // 2
    top, _ = _orbit_rate(grid[half:], y[half:])
    slope, stderr, ratio = _fit(grid, y)
    unc = max(rate_err, abs(rate - top), abs(slope - ratio), stderr)
    return PressureEstimate(rate, slope, ratio, unc, (t0, t1))


def _initial_tilt(lengths: np.ndarray, u: np.ndarray, cutoff: float, target: float, fallback: float) -> float:
    try:
        rough = shell_growth(lengths, np.exp(u - np.max(u)), cutoff)[0]
    except InsufficientData:
        return fallback
    return target - rough


def _tilted_fit(lengths: np.ndarray, u: np.ndarray, cutoff: float, target: float) -> PressureEstimate:
    """
    Fit the weights e^{U + s l} with s moved until their rate equals target.

    Adding s*l to U adds exactly s to the pressure, so the pressure of U is the
    settled rate minus s.
    """
    s = 0.0
    step = math.inf
    for attempt in range(MAX_TILTS):
        est = _fit_window(lengths, np.exp(u + s * lengths), cutoff)
        step = target - est.value
        if abs(step) <= TILT_TOL:
            break
        s = _initial_tilt(lengths, u, cutoff, target, step) if attempt == 0 else s + step
    else:
        raise InsufficientData(f"tilted fit did not settle (last step {step:.3g})")
    return PressureEstimate(est.value - s, est.slope - s, est.ratio - s, est.uncertainty, est.window,
                            est.method, tilt=s, estimator="tilted" if s else "cumulative")


def _shell_estimate(lengths: np.ndarray, weights: np.ndarray, cutoff: float) -> PressureEstimate:
    slope, stderr, ratio = shell_growth(lengths, weights, cutoff)
    return PressureEstimate(slope, slope, ratio, max(abs(slope - ratio), stderr), _window(lengths, cutoff),
                            method="slope", estimator="shell")


def _require_data(spectrum: LengthSpectrum, force: bool) -> None:
    if not spectrum.certified and not force:
        raise NotCertified("spectrum is not certified; pass force=True to estimate anyway")
    distinct = spectrum.distinct_length_count()
    if distinct < MIN_DISTINCT_LENGTHS:
        raise InsufficientData(f"need at least {MIN_DISTINCT_LENGTHS} distinct lengths, have {distinct}")


def entropy(spectrum: LengthSpectrum, force: bool = False) -> PressureEstimate:
    """Topological entropy h from the growth of N(T)."""
    _require_data(spectrum, force)
    est = _fit_window(spectrum.lengths, np.ones(len(spectrum.entries)), spectrum.cutoff)
    if not est.value > est.uncertainty:
        raise InsufficientData(f"entropy estimate {est.value:.4g} is within its uncertainty "
                               f"{est.uncertainty:.2g} of zero")
    return est


def pressure(spectrum: LengthSpectrum, weights: WeightTable, force: bool = False) -> PressureEstimate:
    """Pressure from the growth of S(T) = sum of e^U(gamma) over lengths <= T."""
    _require_data(spectrum, force)
    u = weights.array_for(spectrum)
    lengths = spectrum.lengths
    target = _fit_window(lengths, np.ones(lengths.size), spectrum.cutoff).value
    try:
        est = _tilted_fit(lengths, u, spectrum.cutoff, target)
    except InsufficientData as e:
        log_detail(f"tilted fit failed ({e}); falling back to shell growth")
        est = _shell_estimate(lengths, np.exp(u - np.max(u)), spectrum.cutoff)
    if est.value <= 0:
        warnings.warn(NegativePressureWindow(f"pressure estimate {est.value:.4g} is not positive; "
                                             "the counting asymptotic does not apply"))
        est = replace(est, nonpositive=True)
    return est


def sbr_pressure_bounds(h: float, a: float, b: float, n: int) -> Tuple[float, float]:
    """Bounds on the pressure of -W_SBR/2 under curvature pinched in [-b^2, -a^2]."""
    if not (0 < a <= b):
        raise BadPinching(f"need 0 < a <= b, got a={a}, b={b}")
    if n < 1:
        raise BadPinching(f"dimension parameter n must be >= 1, got {n}")
    return h - n * b / 2.0, h - n * a / 2.0


# ---------------------------------------------------------------------------
# Poincare series and critical exponent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalExponentEstimate:
    value: float
    slope: float
    ratio: float
    uncertainty: float
    radius: float
    radii: Tuple[float, ...] = ()
    counts: Tuple[int, ...] = ()
    complete: bool = True


def poincare_series_partial(group: SchottkyGroup, s: float, radius: float,
                            limits: EnumerationLimits = EnumerationLimits(),
                            prune: bool = True) -> Tuple[float, int]:
    """Sum of exp(-s d(o, g o)) over group elements with displacement <= radius."""
    data = orbit_displacements(group, radius, limits, prune)
    return float(np.sum(np.exp(-s * data.displacements))), int(data.displacements.size)


def critical_exponent_from_counts(radii: Sequence[float], counts: Sequence[float],
                                  complete: bool = True) -> CriticalExponentEstimate:
    r = np.asarray(radii, dtype=float)
    c = np.asarray(counts, dtype=float)
    if r.size < 6:
        raise InsufficientData(f"need orbit counts at >= 6 radii, have {r.size}")
    if np.any(np.diff(r) <= 0) or np.any(c <= 0):
        raise InsufficientData("radii must increase and counts must be positive")
    top = r >= 0.5 * (r[0] + r[-1])
    if top.sum() < 3:
        top[-3:] = True
    slope, stderr, ratio = _fit(r[top], np.log(c[top]))
    unc = max(abs(slope - ratio), stderr)
    return CriticalExponentEstimate(slope, slope, ratio, unc, float(r[-1]),
                                    tuple(r.tolist()), tuple(int(x) for x in c), complete)


def critical_exponent(group: SchottkyGroup, radius: float,
                      limits: EnumerationLimits = EnumerationLimits(),
                      n_radii: int = GRID_POINTS) -> CriticalExponentEstimate:
    """Critical exponent from the growth of #{g : d(o, g o) <= R}."""
    data = orbit_displacements(group, radius, limits)
    if not data.complete:
        log_warning(f"orbit enumeration complete only up to R={data.stats.guaranteed_cutoff:.4g}")
    nontrivial = data.displacements[data.displacements > 0]
    if nontrivial.size == 0:
        raise InsufficientData(f"no group element moves the origin by <= {radius:g}")
    radii = np.linspace(float(nontrivial[0]), float(radius), n_radii)
    counts = np.searchsorted(data.displacements, radii, side="right")
    est = critical_exponent_from_counts(radii, counts, data.complete)
    if not est.value > 0:
        raise InsufficientData(f"critical exponent estimate {est.value:.4g} is not positive")
    return est
