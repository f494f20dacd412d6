"""
Schottky groups: ping-pong validation, certified enumeration of closed
geodesics, and the on-disk length-spectrum format.

Disks live on the Riemann sphere. For the 2-space model they must be centred on
the real line, so each one is the boundary trace of a half-plane of H^2. A disk
with exterior=True is the complement of the closed round disk and contains
infinity.

The completeness certificate rests on spherical derivatives. If
lambda(x, y) = -log sup_{z in D_y} |x'(z)|_sph for letters y != x^-1, then any
cyclically reduced word x1..xL has translation length at least
sum_i lambda(x_i, x_{i+1}) (indices mod L), and any reduced word has
displacement at least its internal sum plus min(lambda). Both follow from the
chain rule for the spherical derivative along the ping-pong disks.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from . import words as W
from .console import log_detail, log_warning
from .errors import (CutoffExceeded, DegenerateDisks, DigestMismatch, FormatError,
                     GroupFileError, PingPongViolation, ResourceExceeded,
                     TooFewGeodesics)
from .moebius import (ComplexLength, MoebiusTransform, act_boundary, compose,
                      translation_length, wrap_angle)
from .potentials import evaluate_expression

SPECTRUM_MAGIC = "#orbitzeta-spectrum v1"
SPECTRUM_COLUMNS = ["canonical_word", "primitive_word", "k", "length", "ell_p",
                    "theta", "trace_re", "trace_im"]
CONTAINMENT_TOL = 1e-9
BOUNDARY_SAMPLES = 64


# ---------------------------------------------------------------------------
# Disks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryDisk:
    letter: str
    center: complex
    radius: float
    exterior: bool = False

    def hermitian(self) -> np.ndarray:
        """Form H with the open disk = {z : (z,1)^* H (z,1) < 0}."""
        c, r = complex(self.center), float(self.radius)
        h = np.array([[1.0, -c], [-np.conj(c), abs(c) ** 2 - r * r]], dtype=complex)
        return -h if self.exterior else h

    @classmethod
    def from_hermitian(cls, letter: str, h: np.ndarray) -> "BoundaryDisk":
        alpha = float(h[0, 0].real)
        beta = complex(h[0, 1])
        gamma = float(h[1, 1].real)
        scale = float(np.abs(h).max())
        if abs(alpha) <= 1e-14 * scale:
            raise DegenerateDisks(f"disk image for '{letter}' passes through infinity", (letter,))
        center = -beta / alpha
        r2 = abs(beta) ** 2 / alpha ** 2 - gamma / alpha
        if r2 <= 0:
            raise DegenerateDisks(f"disk image for '{letter}' is empty", (letter,))
        return cls(letter, center, math.sqrt(r2), exterior=alpha < 0)

    def complement(self) -> "BoundaryDisk":
        return BoundaryDisk(self.letter, self.center, self.radius, not self.exterior)

    def contains(self, z: complex, tol: float = 0.0) -> bool:
        """Closed-disk membership with slack tol (relative to the radius)."""
        if math.isinf(z.real) or math.isinf(z.imag):
            return self.exterior
        dist = abs(z - self.center)
        slack = tol * max(1.0, self.radius)
        return dist >= self.radius - slack if self.exterior else dist <= self.radius + slack

    def boundary_points(self, n: int = BOUNDARY_SAMPLES) -> np.ndarray:
        phi = 2.0 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.exp(1j * phi)


def image_disk(m: MoebiusTransform, disk: BoundaryDisk, letter: Optional[str] = None) -> BoundaryDisk:
    """Exact image of a generalized disk under a Moebius map."""
    inv = m.inverse().matrix
    h = inv.conj().T @ disk.hermitian() @ inv
    h = 0.5 * (h + h.conj().T)
    return BoundaryDisk.from_hermitian(letter or disk.letter, h)


def disk_within(inner: BoundaryDisk, outer: BoundaryDisk, tol: float = CONTAINMENT_TOL) -> bool:
    dist = abs(inner.center - outer.center)
    slack = tol * max(1.0, inner.radius, outer.radius)
    if not inner.exterior and not outer.exterior:
        return dist + inner.radius <= outer.radius + slack
    if not inner.exterior and outer.exterior:
        return dist >= inner.radius + outer.radius - slack
    if inner.exterior and outer.exterior:
        return dist + outer.radius <= inner.radius + slack
    return False


def disk_gap(d1: BoundaryDisk, d2: BoundaryDisk) -> float:
    """Euclidean gap between two disks; positive iff they are disjoint."""
    dist = abs(d1.center - d2.center)
    if d1.exterior and d2.exterior:
        return -math.inf
    if d1.exterior:
        d1, d2 = d2, d1
    if d2.exterior:
        return d2.radius - dist - d1.radius
    return dist - d1.radius - d2.radius


def _spherical_derivative(m: np.ndarray, z):
    return (1.0 + np.abs(z) ** 2) / (np.abs(m[0, 0] * z + m[0, 1]) ** 2 + np.abs(m[1, 0] * z + m[1, 1]) ** 2)


def sup_spherical_derivative(m: MoebiusTransform, disk: BoundaryDisk) -> float:
    """sup over the closed disk of |m'(z)| measured in the spherical metric."""
    mat = m.matrix
    evals, evecs = np.linalg.eigh(mat.conj().T @ mat)
    v = evecs[:, 0]
    global_max = 1.0 / float(evals[0])
    z_star = complex(math.inf) if abs(v[1]) < 1e-300 else complex(v[0] / v[1])
    if disk.contains(z_star):
        return global_max

    def neg(phi):
        return -float(_spherical_derivative(mat, disk.center + disk.radius * np.exp(1j * phi)))

    grid = 2.0 * np.pi * np.arange(360) / 360
    values = _spherical_derivative(mat, disk.center + disk.radius * np.exp(1j * grid))
    step = grid[1] - grid[0]
    best = float(values.max())
    for i in np.argsort(values)[-2:]:
        res = minimize_scalar(neg, bounds=(grid[i] - step, grid[i] + step), method="bounded",
                              options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return min(best * (1.0 + 1e-9), global_max)


def _distance_to_halfspace(disk: BoundaryDisk) -> float:
    """Hyperbolic distance from the origin (0, 1) to the half-space over the disk."""
    c2, r = abs(disk.center) ** 2, disk.radius
    inside = (c2 + 1.0 < r * r) != disk.exterior
    if inside:
        return 0.0
    return math.asinh(abs(c2 + 1.0 - r * r) / (2.0 * r))


# ---------------------------------------------------------------------------
# Groups
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SchottkyGroup:
    generators: Tuple[MoebiusTransform, ...]
    disks: Tuple[BoundaryDisk, ...]
    model_dim: int = 2
    name: str = ""

    def __post_init__(self):
        gens = tuple(self.generators)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "disks", tuple(self.disks))
        if len(gens) < 2:
            raise GroupFileError(f"a Schottky group needs rank >= 2, got {len(gens)}")
        if len(gens) > W.MAX_RANK:
            raise GroupFileError(f"rank {len(gens)} exceeds the {W.MAX_RANK}-letter alphabet")
        if any(g.model_dim != self.model_dim for g in gens):
            raise GroupFileError("generators and group disagree on model_dim")
        letters = sorted(d.letter for d in self.disks)
        if letters != sorted(W.alphabet(len(gens))):
            raise GroupFileError(f"need one disk per letter of {W.alphabet(len(gens))}, got {''.join(letters)}")

    @property
    def rank(self) -> int:
        return len(self.generators)

    def letter_matrix(self, ch: str) -> MoebiusTransform:
        g = self.generators[ord(ch.lower()) - ord("a")]
        return g.inverse() if ch.isupper() else g

    def letter_matrices(self) -> np.ndarray:
        """(2r, 2, 2) array indexed by alphabet position."""
        return np.stack([self.letter_matrix(W.letter_char(i)).matrix for i in range(2 * self.rank)])

    def disk(self, ch: str) -> BoundaryDisk:
        for d in self.disks:
            if d.letter == ch:
                return d
        raise KeyError(ch)

    def word_matrix(self, w: W.Word) -> MoebiusTransform:
        out = MoebiusTransform.identity(self.model_dim)
        for ch in w:
            out = compose(out, self.letter_matrix(ch))
        return out

    @cached_property
    def digest(self) -> str:
        parts = [f"orbitzeta-group v1;dim={self.model_dim}"]
        for g in self.generators:
            for x in g.matrix.ravel():
                parts.append(f"{x.real + 0.0:.15g},{x.imag + 0.0:.15g}")
        return hashlib.sha256(";".join(parts).encode("utf-8")).hexdigest()


def reference_group(t: float = 4.0, twist: float = 0.0) -> SchottkyGroup:
    """
    Two generators: a = diag(e^{t/2}, e^{-t/2}) (times a rotation by `twist`)
    and b = C a C^-1 with C(z) = (z-1)/(z+1). The paired disks are
    |z| < e^{-t/2}, |z| > e^{t/2} and their images under C.
    """
    dim = 3 if twist else 2
    a = MoebiusTransform.diagonal(t, twist, dim)
    conj = MoebiusTransform.from_entries(1.0, -1.0, 1.0, 1.0, dim)
    b = conj @ a @ conj.inverse()
    d_inv = BoundaryDisk("A", 0j, math.exp(-t / 2))
    d_fwd = BoundaryDisk("a", 0j, math.exp(t / 2), exterior=True)
    disks = (d_fwd, d_inv, image_disk(conj, d_fwd, "b"), image_disk(conj, d_inv, "B"))
    return SchottkyGroup((a, b), disks, dim, name=f"reference(t={t:g}, twist={twist:g})")


def _evaluate(value, params: Dict[str, float]) -> float:
    if isinstance(value, str):
        return evaluate_expression(value, params)
    return float(value)


def _complex(value, params: Dict[str, float]) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise GroupFileError(f"complex entries are [re, im] pairs, got {value!r}")
        return complex(_evaluate(value[0], params), _evaluate(value[1], params))
    return complex(_evaluate(value, params), 0.0)


def group_from_document(doc: dict, params: Optional[Dict[str, float]] = None) -> SchottkyGroup:
    params = params or {}
    try:
        dim = int(doc["model_dim"])
        gens = []
        for mat in doc["generators"]:
            entries = [[_complex(x, params) for x in row] for row in mat]
            gens.append(MoebiusTransform(np.array(entries, dtype=complex), dim))
        disks = [BoundaryDisk(str(d["letter"]), _complex(d["center"], params),
                              _evaluate(d["radius"], params), bool(d.get("exterior", False)))
                 for d in doc["disks"]]
    except (KeyError, TypeError, ValueError) as e:
        raise GroupFileError(f"malformed group document: {e}") from e
    return SchottkyGroup(tuple(gens), tuple(disks), dim, name=str(doc.get("name", "")))


def load_group(path: str, params: Optional[Dict[str, float]] = None) -> SchottkyGroup:
    if not os.path.isfile(path):
        raise GroupFileError(f"group file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise GroupFileError(f"{path}: not valid JSON ({e})") from e
    return group_from_document(doc, params)


def group_document(group: SchottkyGroup) -> dict:
    return {
        "name": group.name,
        "model_dim": group.model_dim,
        "generators": [[[[x.real, x.imag] for x in row] for row in g.matrix.tolist()]
                       for g in group.generators],
        "disks": [{"letter": d.letter, "center": [d.center.real, d.center.imag],
                   "radius": d.radius, "exterior": d.exterior} for d in group.disks],
    }


def save_group(group: SchottkyGroup, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(group_document(group), f, indent=2)


# ---------------------------------------------------------------------------
# Ping-pong certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompletenessCertificate:
    kappa: float
    additive_constant: float
    pair_rates: Tuple[Tuple[float, ...], ...]

    @property
    def rate_min(self) -> float:
        return -math.log(self.kappa)

    def guaranteed_cutoff(self, word_length: int) -> float:
        """Every element longer than word_length has translation length above this."""
        return word_length * self.rate_min - self.additive_constant

    def rates_array(self) -> np.ndarray:
        return np.array(self.pair_rates, dtype=float)


def validate_ping_pong(group: SchottkyGroup) -> CompletenessCertificate:
    alphabet = W.alphabet(group.rank)
    for d in group.disks:
        if not d.radius > 0:
            raise DegenerateDisks(f"disk '{d.letter}' has non-positive radius", (d.letter,))
        if group.model_dim == 2 and abs(d.center.imag) > 1e-12 * max(1.0, abs(d.center)):
            raise DegenerateDisks(f"disk '{d.letter}' is not centred on the real line", (d.letter,))

    for i, x in enumerate(alphabet):
        for y in alphabet[i + 1:]:
            if not disk_gap(group.disk(x), group.disk(y)) > 1e-12:
                raise DegenerateDisks(f"disks '{x}' and '{y}' overlap or touch", (x, y))

    for x in alphabet:
        m = group.letter_matrix(x)
        source = group.disk(x.swapcase())
        target = group.disk(x)
        img = image_disk(m, source.complement(), x)
        if not disk_within(img, target):
            raise PingPongViolation(f"'{x}' does not map the outside of '{x.swapcase()}' into '{x}'", x, x)
        for z in source.boundary_points():
            if not target.contains(act_boundary(m, complex(z)), tol=1e-7):
                raise PingPongViolation(f"'{x}' sends a boundary point of '{x.swapcase()}' outside '{x}'", x, x)

    n = len(alphabet)
    rates = [[math.inf] * n for _ in range(n)]
    for i, x in enumerate(alphabet):
        m = group.letter_matrix(x)
        for j, y in enumerate(alphabet):
            if y == x.swapcase():
                continue
            sup = sup_spherical_derivative(m, group.disk(y))
            if not sup < 1.0:
                raise PingPongViolation(f"'{x}' does not contract disk '{y}' (sup |x'| = {sup:.4g})", x, y)
            rates[i][j] = -math.log(sup)
    kappa = math.exp(-min(min(row) for row in rates))
    additive = 2.0 * max(_distance_to_halfspace(d) for d in group.disks)
    return CompletenessCertificate(kappa, additive, tuple(tuple(row) for row in rates))


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedGeodesic:
    canonical_word: str
    primitive_word: str
    k: int
    length: float
    primitive_length: float
    theta_p: float = 0.0
    trace: complex = 0j

    @property
    def complex_length(self) -> ComplexLength:
        return ComplexLength(self.length, wrap_angle(self.k * self.theta_p))

    @property
    def primitive_complex_length(self) -> ComplexLength:
        return ComplexLength(self.primitive_length, self.theta_p)

    @property
    def is_primitive(self) -> bool:
        return self.k == 1


@dataclass(frozen=True)
class EnumerationStats:
    words_visited: int = 0
    max_word_length: int = 0
    visited_per_level: Tuple[int, ...] = ()
    guaranteed_cutoff: float = math.inf
    wall_time: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class EnumerationLimits:
    max_word_length: int = 14
    max_level_nodes: int = 2_000_000
    workers: int = 1


@dataclass(frozen=True)
class LengthSpectrum:
    entries: Tuple[ClosedGeodesic, ...]
    cutoff: float
    certified: bool
    group_digest: str
    model_dim: int = 2
    certificate: Optional[CompletenessCertificate] = None
    stats: EnumerationStats = EnumerationStats()
    length_scale: float = 1.0

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([e.length for e in self.entries], dtype=float)

    @cached_property
    def ks(self) -> np.ndarray:
        return np.array([e.k for e in self.entries], dtype=int)

    def primitives(self) -> List[ClosedGeodesic]:
        return [e for e in self.entries if e.k == 1]

    @cached_property
    def primitive_lengths(self) -> np.ndarray:
        return self.lengths[self.ks == 1]

    def distinct_length_count(self, rel_tol: float = 1e-9) -> int:
        if len(self.entries) == 0:
            return 0
        x = np.sort(self.lengths)
        return 1 + int(np.sum(np.diff(x) > rel_tol * x[1:]))

    def truncated(self, cutoff: float) -> "LengthSpectrum":
        if cutoff > self.cutoff:
            raise CutoffExceeded(f"cannot extend a spectrum from {self.cutoff:g} to {cutoff:g}")
        kept = tuple(e for e in self.entries if e.length <= cutoff)
        return LengthSpectrum(kept, cutoff, self.certified, self.group_digest, self.model_dim,
                              self.certificate, self.stats, self.length_scale)

    def rescaled(self, factor: float) -> "LengthSpectrum":
        """Spectrum of the metric factor^2 * g."""
        entries = tuple(ClosedGeodesic(e.canonical_word, e.primitive_word, e.k, e.length * factor,
                                       e.primitive_length * factor, e.theta_p, e.trace)
                        for e in self.entries)
        return LengthSpectrum(entries, self.cutoff * factor, self.certified, self.group_digest,
                              self.model_dim, self.certificate, self.stats, self.length_scale * factor)


# ---------------------------------------------------------------------------
# Breadth-first enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Job:
    first: int
    mats: np.ndarray
    rates: np.ndarray
    rate_min: float
    additive: float
    bound: float
    max_len: int
    max_nodes: int
    prune: bool
    mode: str


@dataclass
class _JobResult:
    found: List[Tuple[str, np.ndarray]]
    displacements: np.ndarray
    visited_per_level: List[int]
    guaranteed: float
    exhausted_nodes: bool


def _renormalize(mats: np.ndarray) -> np.ndarray:
    det = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
    return mats / np.sqrt(det)[:, None, None]


def _explore(job: _Job) -> _JobResult:
    """Level-by-level expansion of the subtree of reduced words starting with job.first."""
    n_letters = job.mats.shape[0]
    chars = [W.letter_char(i) for i in range(n_letters)]
    first_char = chars[job.first]
    words = [first_char]
    last = np.array([job.first])
    mats = job.mats[job.first][None, :, :].copy()
    internal = np.zeros(1)
    found: List[Tuple[str, np.ndarray]] = []
    disps: List[np.ndarray] = []
    per_level: List[int] = []
    guaranteed = math.inf
    exhausted_nodes = False

    while True:
        depth = len(words[0])
        per_level.append(len(words))

        if job.mode == "classes":
            closing = internal + job.rates[last, job.first] - job.additive
            ok = (last != (job.first ^ 1)) | (depth == 1)
            for i in np.flatnonzero(ok & (closing <= job.bound)):
                if W.is_canonical(words[i]):
                    found.append((words[i], mats[i].copy()))
        else:
            s = 0.5 * np.sum(np.abs(mats) ** 2, axis=(1, 2))
            d = np.arccosh(np.maximum(s, 1.0))
            disps.append(d[d <= job.bound])

        child_words: List[str] = []
        child_last, child_mats, child_internal = [], [], []
        # a canonical word opens with its lowest-ranked letter
        lowest = job.first if job.prune and job.mode == "classes" else 0
        for x in range(lowest, n_letters):
            ci = internal + job.rates[last, x]
            mask = last != (x ^ 1)
            if job.prune:
                mask &= ci + job.rate_min - job.additive <= job.bound
            idx = np.flatnonzero(mask)
            if idx.size == 0:
                continue
            child_words.extend(words[i] + chars[x] for i in idx)
            child_last.append(np.full(idx.size, x))
            child_mats.append(mats[idx] @ job.mats[x])
            child_internal.append(ci[idx])

        if not child_words:
            break
        if depth >= job.max_len:
            guaranteed = min(float(np.min(np.concatenate(child_internal))) + job.rate_min - job.additive,
                             guaranteed)
            break
        if len(child_words) > job.max_nodes:
            exhausted_nodes = True
            guaranteed = min(float(np.min(np.concatenate(child_internal))) + job.rate_min - job.additive,
                             guaranteed)
            break
        words = child_words
        last = np.concatenate(child_last)
        mats = _renormalize(np.concatenate(child_mats))
        internal = np.concatenate(child_internal)

    displacements = np.concatenate(disps) if disps else np.zeros(0)
    return _JobResult(found, displacements, per_level, guaranteed, exhausted_nodes)


def _run_jobs(jobs: Sequence[_Job], workers: int) -> List[_JobResult]:
    if workers <= 1 or len(jobs) <= 1:
        return [_explore(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_explore, jobs))


def _merge_levels(results: Sequence[_JobResult]) -> Tuple[int, ...]:
    depth = max(len(r.visited_per_level) for r in results)
    return tuple(sum(r.visited_per_level[i] for r in results if i < len(r.visited_per_level))
                 for i in range(depth))


def _jobs_for(group: SchottkyGroup, cert: CompletenessCertificate, bound: float,
              limits: EnumerationLimits, prune: bool, mode: str) -> List[_Job]:
    mats = group.letter_matrices()
    rates = cert.rates_array()
    per_job_nodes = max(1, limits.max_level_nodes // (2 * group.rank))
    return [_Job(first, mats, rates, cert.rate_min, cert.additive_constant, bound,
                 limits.max_word_length, per_job_nodes, prune, mode)
            for first in range(2 * group.rank)]


def _sort_key(e: ClosedGeodesic):
    return (e.length, W.rank_key(e.canonical_word))


def enumerate_spectrum(group: SchottkyGroup, cutoff: float,
                       limits: EnumerationLimits = EnumerationLimits(),
                       prune: bool = True) -> LengthSpectrum:
    """
    All conjugacy classes with translation length <= cutoff.

    Returns an uncertified spectrum when the word-length limit stops the search
    first (stats.guaranteed_cutoff says how far it is complete); raises
    ResourceExceeded, carrying that partial spectrum, when a level outgrows
    limits.max_level_nodes.
    """
    start = time.time()
    cert = validate_ping_pong(group)
    results = _run_jobs(_jobs_for(group, cert, cutoff, limits, prune, "classes"), limits.workers)

    classes: Dict[str, np.ndarray] = {}
    for r in results:
        for w, mat in r.found:
            classes.setdefault(w, mat)

    for w, mat in list(classes.items()):
        inv = W.canonical_form(W.inverse(w))
        if inv not in classes:
            classes[inv] = np.array([[mat[1, 1], -mat[0, 1]], [-mat[1, 0], mat[0, 0]]])

    entries = []
    pair_cache: Dict[str, ComplexLength] = {}
    for w, mat in classes.items():
        root, k = W.primitive_root(w)
        # one length per {root, inverse root} pair
        key = min(root, W.canonical_form(W.inverse(root)), key=W.rank_key)
        if key not in pair_cache:
            pair_cache[key] = translation_length(group.word_matrix(key))
        cl = pair_cache[key]
        length = k * cl.ell
        if length <= cutoff:
            trace = complex(mat[0, 0] + mat[1, 1])
            entries.append(ClosedGeodesic(w, root, k, length, cl.ell, cl.theta, trace))
    entries.sort(key=_sort_key)

    guaranteed = min(r.guaranteed for r in results)
    levels = _merge_levels(results)
    stats = EnumerationStats(sum(levels), len(levels), levels, guaranteed, time.time() - start)
    certified = guaranteed >= cutoff
    spectrum = LengthSpectrum(tuple(entries), float(cutoff), certified, group.digest,
                              group.model_dim, cert, stats)
    if any(r.exhausted_nodes for r in results):
        raise ResourceExceeded(f"level size exceeded {limits.max_level_nodes} nodes; "
                               f"complete only up to T={guaranteed:.6g}", partial=spectrum)
    if not certified:
        log_warning(f"spectrum not certified: complete only up to T={guaranteed:.6g} "
                    f"(asked {cutoff:g}); raise the word-length limit")
    else:
        log_detail(f"{len(entries)} classes up to T={cutoff:g} from {stats.words_visited} words")
    return spectrum


@dataclass(frozen=True)
class OrbitData:
    displacements: np.ndarray
    radius: float
    complete: bool
    stats: EnumerationStats


def orbit_displacements(group: SchottkyGroup, radius: float,
                        limits: EnumerationLimits = EnumerationLimits(),
                        prune: bool = True) -> OrbitData:
    """Sorted displacements d(o, g o) <= radius over all group elements, identity included."""
    start = time.time()
    cert = validate_ping_pong(group)
    results = _run_jobs(_jobs_for(group, cert, radius, limits, prune, "orbit"), limits.workers)
    disps = np.sort(np.concatenate([np.zeros(1)] + [r.displacements for r in results]))
    guaranteed = min(r.guaranteed for r in results)
    levels = _merge_levels(results)
    stats = EnumerationStats(sum(levels), len(levels), levels, guaranteed, time.time() - start)
    data = OrbitData(disps, float(radius), guaranteed >= radius, stats)
    if any(r.exhausted_nodes for r in results):
        raise ResourceExceeded(f"orbit enumeration exceeded {limits.max_level_nodes} nodes", partial=data)
    return data


# ---------------------------------------------------------------------------
# Counting and arithmeticity
# ---------------------------------------------------------------------------

def counting_function(spectrum: LengthSpectrum, grid: Sequence[float]) -> pd.DataFrame:
    grid = np.asarray(grid, dtype=float)
    if grid.size and float(grid.max()) > spectrum.cutoff * (1 + 1e-12):
        raise CutoffExceeded(f"grid reaches {grid.max():g} beyond the spectrum cutoff {spectrum.cutoff:g}")
    lengths = np.sort(spectrum.lengths)
    prim = np.sort(spectrum.primitive_lengths)
    n = np.searchsorted(lengths, grid, side="right")
    n_p = np.searchsorted(prim, grid, side="right")
    return pd.DataFrame({"T": grid, "N": n, "N_p": n_p, "N_unoriented": n / 2.0})


@dataclass(frozen=True)
class ArithmeticityVerdict:
    verdict: str
    witness: Optional[Tuple[str, str]] = None
    ratio: Optional[float] = None
    best_rational: Optional[Fraction] = None

    @property
    def mixing(self) -> Optional[bool]:
        """A non-arithmetic spectrum forces a topologically mixing geodesic flow."""
        return True if self.verdict == "non_arithmetic_witness" else None


def non_arithmeticity_check(spectrum: LengthSpectrum, tol: float = 1e-8,
                            max_denominator: int = 1000, max_values: int = 50) -> ArithmeticityVerdict:
    prims = spectrum.primitives()
    if len(prims) < 2:
        raise TooFewGeodesics("need at least two primitive closed geodesics")
    reps: List[ClosedGeodesic] = []
    for e in sorted(prims, key=_sort_key):
        if not reps or e.length > reps[-1].length * (1 + 1e-9):
            reps.append(e)
        if len(reps) >= max_values:
            break
    for i, g1 in enumerate(reps):
        for g2 in reps[i + 1:]:
            ratio = g2.length / g1.length
            approx = Fraction(ratio).limit_denominator(max_denominator)
            if abs(ratio - float(approx)) > tol * ratio:
                return ArithmeticityVerdict("non_arithmetic_witness",
                                            (g1.canonical_word, g2.canonical_word), ratio, approx)
    return ArithmeticityVerdict("inconclusive")


# ---------------------------------------------------------------------------
# Spectrum files
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_atomic(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".orbitzeta-", dir=folder)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def spectrum_to_text(spectrum: LengthSpectrum) -> str:
    header = [
        SPECTRUM_MAGIC,
        f"#group-digest {spectrum.group_digest}",
        f"#cutoff {_fmt(spectrum.cutoff)}",
        f"#certified {'true' if spectrum.certified else 'false'}",
        f"#model-dim {spectrum.model_dim}",
        f"#length-scale {_fmt(spectrum.length_scale)}",
        f"#words-visited {spectrum.stats.words_visited}",
        f"#max-word-length {spectrum.stats.max_word_length}",
        f"#visited-per-level {','.join(str(n) for n in spectrum.stats.visited_per_level)}",
        f"#guaranteed-cutoff {_fmt(spectrum.stats.guaranteed_cutoff)}",
    ]
    cert = spectrum.certificate
    if cert is not None:
        header += [
            f"#kappa {_fmt(cert.kappa)}",
            f"#additive-constant {_fmt(cert.additive_constant)}",
            f"#pair-rates {len(cert.pair_rates)} " + ",".join(_fmt(x) for row in cert.pair_rates for x in row),
        ]
    df = pd.DataFrame({
        "canonical_word": [e.canonical_word for e in spectrum.entries],
        "primitive_word": [e.primitive_word for e in spectrum.entries],
        "k": [e.k for e in spectrum.entries],
        "length": [e.length for e in spectrum.entries],
        "ell_p": [e.primitive_length for e in spectrum.entries],
        "theta": [e.theta_p for e in spectrum.entries],
        "trace_re": [e.trace.real for e in spectrum.entries],
        "trace_im": [e.trace.imag for e in spectrum.entries],
    }, columns=SPECTRUM_COLUMNS)
    buf = io.StringIO()
    df.to_csv(buf, index=False, float_format="%.17g", lineterminator="\n")
    return "\n".join(header) + "\n" + buf.getvalue()


def save_spectrum(spectrum: LengthSpectrum, path: str) -> None:
    write_atomic(path, spectrum_to_text(spectrum))


def _header_value(headers: Dict[str, str], key: str, path: str) -> str:
    if key not in headers:
        raise FormatError(f"{path}: missing header '#{key}'")
    return headers[key]


def spectrum_from_text(text: str, source: str = "<text>",
                       group: Optional[SchottkyGroup] = None) -> LengthSpectrum:
    lines = text.splitlines()
    if not lines or lines[0].strip() != SPECTRUM_MAGIC:
        raise FormatError(f"{source}: not an orbitzeta spectrum (bad magic line)")
    headers: Dict[str, str] = {}
    body_start = len(lines)
    for i, line in enumerate(lines[1:], start=1):
        if not line.startswith("#"):
            body_start = i
            break
        key, _, value = line[1:].partition(" ")
        headers[key] = value.strip()
    try:
        digest = _header_value(headers, "group-digest", source)
        cutoff = float(_header_value(headers, "cutoff", source))
        certified_raw = _header_value(headers, "certified", source)
        if certified_raw not in ("true", "false"):
            raise FormatError(f"{source}: '#certified' must be true or false")
        model_dim = int(_header_value(headers, "model-dim", source))
        levels_raw = headers.get("visited-per-level", "")
        stats = EnumerationStats(
            int(headers.get("words-visited", "0")),
            int(headers.get("max-word-length", "0")),
            tuple(int(x) for x in levels_raw.split(",") if x),
            float(headers.get("guaranteed-cutoff", "inf")),
        )
        cert = None
        if "kappa" in headers:
            n_raw, _, values = headers["pair-rates"].partition(" ")
            n = int(n_raw)
            flat = [float(x) for x in values.split(",")]
            if len(flat) != n * n:
                raise FormatError(f"{source}: pair-rates table has {len(flat)} values, expected {n * n}")
            cert = CompletenessCertificate(float(headers["kappa"]), float(headers["additive-constant"]),
                                           tuple(tuple(flat[i * n:(i + 1) * n]) for i in range(n)))
        scale = float(headers.get("length-scale", "1"))
    except (KeyError, ValueError) as e:
        raise FormatError(f"{source}: bad header value ({e})") from e

    if group is not None and group.digest != digest:
        raise DigestMismatch(f"{source}: spectrum belongs to group {digest[:12]}..., not {group.digest[:12]}...")

    try:
        df = pd.read_csv(io.StringIO("\n".join(lines[body_start:])),
                         dtype={"canonical_word": str, "primitive_word": str},
                         keep_default_na=False, float_precision="round_trip")
    except Exception as e:
        raise FormatError(f"{source}: unreadable rows ({e})") from e
    if list(df.columns) != SPECTRUM_COLUMNS:
        raise FormatError(f"{source}: expected columns {SPECTRUM_COLUMNS}, got {list(df.columns)}")
    try:
        entries = tuple(
            ClosedGeodesic(str(r.canonical_word), str(r.primitive_word), int(r.k), float(r.length),
                           float(r.ell_p), float(r.theta), complex(float(r.trace_re), float(r.trace_im)))
            for r in df.itertuples(index=False)
        )
    except (TypeError, ValueError) as e:
        raise FormatError(f"{source}: bad row ({e})") from e
    return LengthSpectrum(entries, cutoff, certified_raw == "true", digest, model_dim, cert, stats, scale)


def load_spectrum(path: str, group: Optional[SchottkyGroup] = None) -> LengthSpectrum:
    if not os.path.isfile(path):
        raise FormatError(f"spectrum file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return spectrum_from_text(f.read(), path, group)
