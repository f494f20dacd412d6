"""
Spectral consequences of the dynamical data, and entropy sweeps over group families.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import quad

from .console import log_status, log_warning
from .errors import BadPinching, InsufficientData, OrbitZetaError
from .potentials import evaluate_expression
from .schottky import (EnumerationLimits, LengthSpectrum, SchottkyGroup, enumerate_spectrum,
                       group_from_document, load_group, reference_group)
from .thermo import entropy

MIN_SWEEP_POINTS = 7


def _check_pinching(a: float, b: float) -> None:
    if not (0 < a <= b):
        raise BadPinching(f"need 0 < a <= b, got a={a}, b={b}")


# ---------------------------------------------------------------------------
# Bottom of the spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralBounds:
    h: float
    a: float
    b: float
    n: int
    lower: float
    upper: float
    branch: str

    @property
    def pure_point(self) -> bool:
        return self.branch == "supercritical"


def lambda0_bounds(h: float, a: float, b: float, n: int) -> SpectralBounds:
    """Bounds on the bottom of the Laplace spectrum from the entropy and the pinching [a, b]."""
    _check_pinching(a, b)
    if n < 1:
        raise BadPinching(f"n must be >= 1, got {n}")
    if not h > 0:
        raise ValueError(f"entropy must be positive, got {h}")
    na = n * a
    upper = (n * b) ** 2 / 4.0
    if h > na / 2.0:
        return SpectralBounds(h, a, b, n, h * (na - h), upper, "supercritical")
    return SpectralBounds(h, a, b, n, na ** 2 / 4.0, upper, "subcritical")


def sullivan_lambda0(delta: float, n: int) -> float:
    if delta > n / 2.0:
        return delta * (n - delta)
    return n ** 2 / 4.0


def pure_point_criterion(h: float, n: int) -> bool:
    """Pure-point spectrum is non-empty exactly when h > n/2 (constant curvature)."""
    return h > n / 2.0


# ---------------------------------------------------------------------------
# Refined counting
# ---------------------------------------------------------------------------

def _li_from_two(x: float) -> float:
    # substitute t = e^u: integral of e^u / u over [log 2, log x]
    val, _ = quad(lambda u: math.exp(u) / u, math.log(2.0), math.log(x), epsrel=1e-12, limit=200)
    return val


def li(x: float) -> float:
    """Logarithmic integral with lower limit 2; signed for 1 < x < 2 and 0 for x <= 1."""
    x = float(x)
    if x <= 1.0:
        return 0.0
    if x >= 2.0:
        return _li_from_two(x)
    val, _ = quad(lambda t: 1.0 / math.log(t), x, 2.0, epsrel=1e-12, limit=200)
    return -val


@dataclass(frozen=True)
class RefinedCounting:
    table: pd.DataFrame
    h: float
    alphas: Tuple[float, ...]
    beta: float

    @property
    def rms_remainder(self) -> float:
        return float(np.sqrt(np.mean(self.table["remainder"].to_numpy() ** 2)))


def remainder_exponent(h: float, n: int) -> float:
    return n / (n + 1.0) * (0.5 + h)


def gn_refined_counting(spectrum: LengthSpectrum, h: float, eigen_alphas: Sequence[float] = (),
                        grid_points: int = 41) -> RefinedCounting:
    """N_p(T) against li(e^{hT}) + sum_i li(e^{alpha_i T}) along a T grid."""
    prims = np.sort(spectrum.primitive_lengths)
    if prims.size < 2:
        raise InsufficientData("need at least two primitive classes")
    n = spectrum.model_dim - 1
    grid = np.linspace(float(prims[0]), spectrum.cutoff, grid_points)
    n_p = np.searchsorted(prims, grid, side="right")
    model = np.array([li(math.exp(h * t)) + sum(li(math.exp(a * t)) for a in eigen_alphas) for t in grid])
    beta = remainder_exponent(h, n)
    table = pd.DataFrame({
        "T": grid,
        "N_p": n_p,
        "model": model,
        "remainder": n_p - model,
        "bound_curve": np.exp(beta * grid) / grid,
    })
    return RefinedCounting(table, float(h), tuple(float(a) for a in eigen_alphas), beta)


# ---------------------------------------------------------------------------
# Extension strips
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StripReport:
    family: str
    rate: float
    holder_exponent: float
    expansion: Tuple[float, float]
    edge: Tuple[float, float]


def extension_strip(family: str, rate: float, a: float, b: float, holder_exponent: float = 1.0) -> StripReport:
    """
    Half-plane edge to which the zeta function continues, as an interval over the
    unknown expansion factor lambda in [a, b]. Informational only.
    """
    _check_pinching(a, b)
    if family == "selberg":
        alpha = 1.0
    elif family == "weighted":
        alpha = float(holder_exponent)
    elif family == "gn":
        alpha = min(2.0 * a / b, 1.0)
    else:
        raise ValueError(f"unknown zeta family '{family}'")
    edge = (rate - b * alpha / 2.0, rate - a * alpha / 2.0)
    return StripReport(family, float(rate), alpha, (float(a), float(b)), edge)


# ---------------------------------------------------------------------------
# Entropy sweeps
# ---------------------------------------------------------------------------

class SweepFamily:
    name = "family"

    def spectrum_at(self, alpha: float, cutoff: float, limits: EnumerationLimits) -> LengthSpectrum:
        raise NotImplementedError


class MetricScaleFamily(SweepFamily):
    """The metric (1+alpha)^2 g: every length times 1+alpha, same hyperbolic cutoff."""

    name = "metric-scale"

    def __init__(self, group: SchottkyGroup):
        self.group = group
        self._base: Optional[LengthSpectrum] = None

    def spectrum_at(self, alpha, cutoff, limits):
        if self._base is None or self._base.cutoff != cutoff:
            self._base = enumerate_spectrum(self.group, cutoff, limits)
        return self._base.rescaled(1.0 + alpha)


class SeparationFamily(SweepFamily):
    """Reference group with generator translation length t(alpha)."""

    name = "separation"

    def __init__(self, translation: str = "4*(1+alpha)", twist: float = 0.0):
        self.translation = translation
        self.twist = twist

    def group_at(self, alpha: float) -> SchottkyGroup:
        return reference_group(evaluate_expression(self.translation, {"alpha": alpha}), self.twist)

    def spectrum_at(self, alpha, cutoff, limits):
        return enumerate_spectrum(self.group_at(alpha), cutoff, limits)


class TemplateFamily(SweepFamily):
    """Group document whose numeric fields may be formulas in alpha."""

    name = "template"

    def __init__(self, document: dict):
        self.document = document

    def group_at(self, alpha: float) -> SchottkyGroup:
        return group_from_document(self.document, {"alpha": alpha})

    def spectrum_at(self, alpha, cutoff, limits):
        return enumerate_spectrum(self.group_at(alpha), cutoff, limits)


def family_from_document(doc: dict, base_dir: str = ".") -> SweepFamily:
    kind = str(doc.get("family", "")).strip().lower()
    if kind == "metric-scale":
        if "group_file" in doc:
            group = load_group(os.path.join(base_dir, doc["group_file"]))
        elif "group" in doc:
            group = group_from_document(doc["group"])
        else:
            group = reference_group(float(doc.get("t", 4.0)))
        return MetricScaleFamily(group)
    if kind == "separation":
        return SeparationFamily(str(doc.get("t", "4*(1+alpha)")), float(doc.get("twist", 0.0)))
    if kind == "template":
        if "group" not in doc:
            raise ValueError("template families need a 'group' document")
        return TemplateFamily(doc["group"])
    raise ValueError(f"unknown sweep family '{kind}' (metric-scale, separation, template)")


def load_sweep_family(path: str) -> SweepFamily:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    return family_from_document(doc, os.path.dirname(os.path.abspath(path)))


@dataclass(frozen=True)
class SweepResult:
    alphas: np.ndarray
    h: np.ndarray
    uncertainty: np.ndarray
    dd1: np.ndarray
    dd2: np.ndarray
    jumps: np.ndarray
    jump_bounds: np.ndarray
    failures: Tuple[Tuple[float, str], ...] = field(default=())

    @property
    def smooth(self) -> bool:
        inner = ~np.isnan(self.jumps)
        return bool(np.all(self.jumps[inner] <= self.jump_bounds[inner]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"alpha": self.alphas, "h": self.h, "uncertainty": self.uncertainty,
                             "dd1": self.dd1, "dd2": self.dd2})


def divided_differences(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    dd1 = np.gradient(y, x)
    dd2 = np.full(x.shape, np.nan)
    for i in range(1, len(x) - 1):
        h0, h1 = x[i] - x[i - 1], x[i + 1] - x[i]
        dd2[i] = 2.0 * (y[i - 1] / (h0 * (h0 + h1)) - y[i] / (h0 * h1) + y[i + 1] / (h1 * (h0 + h1)))
    return dd1, dd2


def _jumps(x: np.ndarray, y: np.ndarray, unc: np.ndarray, dd2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Deviation from the neighbours' chord, against 3x uncertainty plus the typical curvature term."""
    jumps = np.full(x.shape, np.nan)
    bounds = np.full(x.shape, np.nan)
    inner = dd2[~np.isnan(dd2)]
    curvature = abs(float(np.median(inner))) if inner.size else 0.0
    for i in range(1, len(x) - 1):
        h0, h1 = x[i] - x[i - 1], x[i + 1] - x[i]
        chord = (h1 * y[i - 1] + h0 * y[i + 1]) / (h0 + h1)
        jumps[i] = abs(y[i] - chord)
        bounds[i] = 3.0 * float(np.max(unc[i - 1:i + 2])) + 0.5 * curvature * h0 * h1
    return jumps, bounds


def entropy_sweep(family: SweepFamily, grid: Sequence[float], cutoff: float,
                  limits: EnumerationLimits = EnumerationLimits(), force: bool = False) -> SweepResult:
    alphas = np.asarray(grid, dtype=float)
    if alphas.size < MIN_SWEEP_POINTS:
        raise InsufficientData(f"grid too small: need >= {MIN_SWEEP_POINTS} points, got {alphas.size}")
    if np.any(np.diff(alphas) <= 0):
        raise ValueError("sweep grid must be strictly increasing")

    kept_a: List[float] = []
    kept_h: List[float] = []
    kept_u: List[float] = []
    failures: List[Tuple[float, str]] = []
    for i, alpha in enumerate(alphas):
        log_status(int(100 * i / alphas.size), f"{family.name}: alpha = {alpha:g}")
        try:
            est = entropy(family.spectrum_at(float(alpha), cutoff, limits), force=force)
        except OrbitZetaError as e:
            log_warning(f"alpha = {alpha:g} skipped: {e}")
            failures.append((float(alpha), str(e)))
            continue
        kept_a.append(float(alpha))
        kept_h.append(est.value)
        kept_u.append(est.uncertainty)
    log_status(100, f"{family.name}: {len(kept_a)}/{alphas.size} points")

    if len(kept_a) < 3:
        raise InsufficientData(f"only {len(kept_a)} sweep points survived")
    x, y, u = np.array(kept_a), np.array(kept_h), np.array(kept_u)
    dd1, dd2 = divided_differences(x, y)
    jumps, bounds = _jumps(x, y, u, dd2)
    return SweepResult(x, y, u, dd1, dd2, jumps, bounds, tuple(failures))
