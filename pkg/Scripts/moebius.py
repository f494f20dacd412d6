"""
Linear-fractional isometries of hyperbolic 2- and 3-space.

A MoebiusTransform is a unit-determinant 2x2 matrix: real entries act on the
upper half-plane (model_dim 2), complex entries on the upper half-space
(model_dim 3). M and -M name the same isometry, so every derived quantity
here goes through |tr|, tr^2 or eigenvalue moduli and never picks a sign.

Points of the model are pairs (z, h) with h > 0; the half-plane point x+iy
is (x, y). The model origin is i (resp. j), i.e. (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from .errors import NotHyperbolic

DET_TOL = 1e-12
IDENTITY_TOL = 1e-12
TRACE_TOL = 1e-10
INFINITY = complex(math.inf, 0.0)


def is_infinite(z: complex) -> bool:
    return math.isinf(z.real) or math.isinf(z.imag)


def wrap_angle(x: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    y = math.remainder(float(x), 2.0 * math.pi)
    return math.pi if y <= -math.pi else y


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

class IsometryClass(str, Enum):
    IDENTITY = "identity"
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic_or_loxodromic"


@dataclass(frozen=True)
class ComplexLength:
    ell: float
    theta: float = 0.0

    def power(self, k: int) -> "ComplexLength":
        return ComplexLength(k * self.ell, wrap_angle(k * self.theta))


def normalize_sl2(m: np.ndarray) -> np.ndarray:
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if det == 0:
        raise ValueError("singular matrix cannot represent an isometry")
    return m / np.sqrt(det)


@dataclass(frozen=True, eq=False)
class MoebiusTransform:
    matrix: np.ndarray
    model_dim: int = 2

    def __post_init__(self):
        if self.model_dim not in (2, 3):
            raise ValueError(f"model_dim must be 2 or 3, got {self.model_dim}")
        m = np.array(self.matrix, dtype=complex).reshape(2, 2)
        scale = max(1.0, float(np.abs(m).max()))
        if self.model_dim == 2:
            if np.any(np.abs(m.imag) > 1e-12 * scale):
                raise ValueError("the 2-space model needs real matrix entries")
            m = m.real.astype(complex)
            if (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]).real <= 0:
                raise ValueError("the 2-space model needs a positive determinant")
        m = normalize_sl2(m)
        if self.model_dim == 2:
            m = m.real.astype(complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    # --- constructors ---
    @classmethod
    def from_entries(cls, a, b, c, d, model_dim: int = 2) -> "MoebiusTransform":
        return cls(np.array([[a, b], [c, d]], dtype=complex), model_dim)

    @classmethod
    def identity(cls, model_dim: int = 2) -> "MoebiusTransform":
        return cls(np.eye(2, dtype=complex), model_dim)

    @classmethod
    def diagonal(cls, ell: float, theta: float = 0.0, model_dim: int = 2) -> "MoebiusTransform":
        """Translation of complex length ell + i*theta along the axis (0, inf)."""
        lam = np.exp(0.5 * complex(ell, theta))
        return cls(np.array([[lam, 0.0], [0.0, 1.0 / lam]]), model_dim)

    # --- entries ---
    @property
    def a(self) -> complex:
        return complex(self.matrix[0, 0])

    @property
    def b(self) -> complex:
        return complex(self.matrix[0, 1])

    @property
    def c(self) -> complex:
        return complex(self.matrix[1, 0])

    @property
    def d(self) -> complex:
        return complex(self.matrix[1, 1])

    @property
    def trace(self) -> complex:
        return complex(self.matrix[0, 0] + self.matrix[1, 1])

    @property
    def determinant(self) -> complex:
        m = self.matrix
        return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    def inverse(self) -> "MoebiusTransform":
        m = self.matrix
        return MoebiusTransform(np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]), self.model_dim)

    def power(self, k: int) -> "MoebiusTransform":
        base = self if k >= 0 else self.inverse()
        out = MoebiusTransform.identity(self.model_dim)
        for _ in range(abs(k)):
            out = compose(out, base)
        return out

    def __matmul__(self, other: "MoebiusTransform") -> "MoebiusTransform":
        return compose(self, other)

    def equals(self, other: "MoebiusTransform", tol: float = 1e-12) -> bool:
        """Equality as isometries (up to the overall sign)."""
        if other.model_dim != self.model_dim:
            return False
        diff = np.abs(self.matrix - other.matrix).max()
        summ = np.abs(self.matrix + other.matrix).max()
        return bool(min(diff, summ) <= tol)

    def __repr__(self) -> str:
        m = self.matrix if self.model_dim == 3 else self.matrix.real
        return f"MoebiusTransform({m.tolist()}, model_dim={self.model_dim})"


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def compose(m: MoebiusTransform, n: MoebiusTransform) -> MoebiusTransform:
    if m.model_dim != n.model_dim:
        raise ValueError("cannot compose transforms from different models")
    return MoebiusTransform(m.matrix @ n.matrix, m.model_dim)


def classify(m: MoebiusTransform) -> IsometryClass:
    t2 = m.trace * m.trace
    if abs(t2.imag) > TRACE_TOL * max(1.0, abs(t2)):
        return IsometryClass.HYPERBOLIC
    x = t2.real
    if abs(x - 4.0) <= TRACE_TOL * 4.0:
        eye = np.eye(2)
        if min(np.abs(m.matrix - eye).max(), np.abs(m.matrix + eye).max()) <= IDENTITY_TOL:
            return IsometryClass.IDENTITY
        return IsometryClass.PARABOLIC
    if -TRACE_TOL <= x < 4.0:
        return IsometryClass.ELLIPTIC
    return IsometryClass.HYPERBOLIC


def _require_hyperbolic(m: MoebiusTransform) -> None:
    kind = classify(m)
    if kind is not IsometryClass.HYPERBOLIC:
        raise NotHyperbolic(f"expected a hyperbolic/loxodromic element, got {kind.value} (tr={m.trace:.6g})")


def _expanding_eigenvalue(m: MoebiusTransform) -> complex:
    t = m.trace
    root = np.sqrt(complex(t * t - 4.0))
    # pick the root that avoids cancellation; it is the one of modulus >= 1
    return (t + root) / 2 if abs(t + root) >= abs(t - root) else (t - root) / 2


def translation_length(m: MoebiusTransform) -> ComplexLength:
    _require_hyperbolic(m)
    if m.model_dim == 2:
        return ComplexLength(2.0 * math.acosh(abs(m.trace.real) / 2.0), 0.0)
    lam = _expanding_eigenvalue(m)
    return ComplexLength(2.0 * math.log(abs(lam)), wrap_angle(2.0 * np.angle(lam)))


def displacement(m: MoebiusTransform) -> float:
    """Hyperbolic distance from the model origin to its image."""
    s = float(np.sum(np.abs(m.matrix) ** 2)) / 2.0
    return math.acosh(max(1.0, s))


def act_boundary(m: MoebiusTransform, z: complex) -> complex:
    a, b, c, d = m.a, m.b, m.c, m.d
    if is_infinite(z):
        return INFINITY if c == 0 else a / c
    den = c * z + d
    if den == 0:
        return INFINITY
    return (a * z + b) / den


def act_point(m: MoebiusTransform, z, h):
    """Poincare extension of m to the upper half-space; (z, h) may be arrays."""
    a, b, c, d = m.a, m.b, m.c, m.d
    z = np.asarray(z, dtype=complex)
    h = np.asarray(h, dtype=float)
    cz_d = c * z + d
    den = np.abs(cz_d) ** 2 + abs(c) ** 2 * h * h
    z_new = ((a * z + b) * np.conj(cz_d) + a * np.conj(c) * h * h) / den
    return z_new, h / den


def fixed_points(m: MoebiusTransform) -> Tuple[complex, complex]:
    """(repelling, attracting) boundary fixed points of a hyperbolic element."""
    _require_hyperbolic(m)
    a, b, c, d = m.a, m.b, m.c, m.d
    if abs(c) <= 1e-15 * max(abs(a), abs(d)):
        other = b / (d - a)
        return (other, INFINITY) if abs(a) > abs(d) else (INFINITY, other)
    disc = np.sqrt(complex((a + d) ** 2 - 4.0))
    z1 = (a - d + disc) / (2 * c)
    z2 = (a - d - disc) / (2 * c)
    # the multiplier at z is (cz+d)^-2, so the attracting point has |cz+d| > 1
    if abs(c * z1 + d) > abs(c * z2 + d):
        return z2, z1
    return z1, z2


@dataclass(frozen=True)
class Axis:
    fixed_minus: complex
    fixed_plus: complex
    frame: MoebiusTransform
    offset: float
    length: ComplexLength

    def __call__(self, t):
        """Unit-speed parametrization; axis(0) is the point nearest the origin."""
        t = np.asarray(t, dtype=float)
        return act_point(self.frame, np.zeros_like(t), np.exp(t + self.offset))


def axis(m: MoebiusTransform) -> Axis:
    u, v = fixed_points(m)
    if is_infinite(u):
        q = [[v, -1.0], [1.0, 0.0]]
    elif is_infinite(v):
        q = [[1.0, u], [0.0, 1.0]]
    elif m.model_dim == 2 and (v - u).real < 0:
        q = [[v, -u], [1.0, -1.0]]
    else:
        q = [[v, u], [1.0, 1.0]]
    frame = MoebiusTransform(np.array(q, dtype=complex), m.model_dim)
    w, k = act_point(frame.inverse(), 0.0, 1.0)
    offset = 0.5 * math.log(abs(complex(w)) ** 2 + float(k) ** 2)
    return Axis(u, v, frame, offset, translation_length(m))


# ---------------------------------------------------------------------------
# Poincare maps
# ---------------------------------------------------------------------------

def multipliers_from_length(length: ComplexLength, model_dim: int) -> np.ndarray:
    """Poincare-map eigenvalues, expanding ones first."""
    ell, theta = length.ell, length.theta
    if model_dim == 2:
        return np.array([math.exp(ell), math.exp(-ell)], dtype=complex)
    return np.exp(np.array([complex(ell, theta), complex(ell, -theta),
                            complex(-ell, theta), complex(-ell, -theta)]))


def poincare_multipliers(m: MoebiusTransform) -> np.ndarray:
    return multipliers_from_length(translation_length(m), m.model_dim)


def _log_abs_one_minus_exp(a, b):
    """log|1 - exp(a + ib)| for a <= 0, free of cancellation."""
    a = np.asarray(a, dtype=float)
    b = np.broadcast_to(np.asarray(b, dtype=float), a.shape)
    ea = np.exp(a)
    em = np.expm1(a)
    # |1 - e^(a+ib)|^2 = 1 - 2 e^a cos b + e^2a
    near = 0.5 * np.log(em * em + 4.0 * ea * np.sin(0.5 * b) ** 2)
    far = 0.5 * np.log1p(ea * (ea - 2.0 * np.cos(b)))
    return np.where(ea < 0.5, far, near)


def log_weight_ratio(ell, theta, k, model_dim: int):
    """log(p / w) with p = |det(I - P^k)|^(-1/2) and w = exp(-n k ell / 2)."""
    a = np.asarray(k, dtype=float) * np.asarray(ell, dtype=float)
    b = np.asarray(k, dtype=float) * np.asarray(theta, dtype=float)
    if model_dim == 2:
        return -_log_abs_one_minus_exp(-a, 0.0 * b)
    return -2.0 * _log_abs_one_minus_exp(-a, b)


def log_det_I_minus_Pk(ell, theta, k, model_dim: int):
    """log|det(I - P^k)| from the primitive complex length; broadcasts over arrays."""
    a = np.asarray(k, dtype=float) * np.asarray(ell, dtype=float)
    b = np.asarray(k, dtype=float) * np.asarray(theta, dtype=float)
    if model_dim == 2:
        # (1 - e^a)(1 - e^-a) = e^a (1 - e^-a)^2 up to sign
        return a + 2.0 * _log_abs_one_minus_exp(-a, 0.0 * b)
    return 2.0 * a + 4.0 * _log_abs_one_minus_exp(-a, b)


def det_I_minus_Pk(m: MoebiusTransform, k: int) -> float:
    if k < 1:
        raise ValueError("k must be a positive integer")
    length = translation_length(m)
    return float(np.exp(log_det_I_minus_Pk(length.ell, length.theta, k, m.model_dim)))
