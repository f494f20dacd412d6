"""
Exception types raised across the orbitzeta library.

The CLI maps these onto exit codes (see orbitzeta.py); library callers can
catch OrbitZetaError to handle everything in one place.
"""

from __future__ import annotations

from typing import Any, Optional


class OrbitZetaError(Exception):
    """Base class for every library error."""


# ---------------------------------------------------------------------------
# Isometry algebra
# ---------------------------------------------------------------------------

class NotHyperbolic(OrbitZetaError):
    pass


# ---------------------------------------------------------------------------
# Groups, words and spectra
# ---------------------------------------------------------------------------

class GroupFileError(OrbitZetaError):
    pass


class PingPongViolation(OrbitZetaError):
    def __init__(self, message: str, letter: str = "", target: str = ""):
        super().__init__(message)
        self.letter = letter
        self.target = target


class DegenerateDisks(OrbitZetaError):
    def __init__(self, message: str, pair: tuple = ()):
        super().__init__(message)
        self.pair = pair


class EmptyWord(OrbitZetaError):
    pass


class ResourceExceeded(OrbitZetaError):
    """Raised when an enumeration limit is hit; `partial` holds what was found."""

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial


class CutoffExceeded(OrbitZetaError):
    pass


class TooFewGeodesics(OrbitZetaError):
    pass


class FormatError(OrbitZetaError):
    pass


class DigestMismatch(OrbitZetaError):
    pass


# ---------------------------------------------------------------------------
# Potentials and estimators
# ---------------------------------------------------------------------------

class ParseError(OrbitZetaError):
    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownIdentifier(ParseError):
    def __init__(self, name: str, position: int = 0):
        super().__init__(f"unknown identifier '{name}'", position)
        self.name = name


class QuadratureNonconvergent(OrbitZetaError):
    pass


class ModelUnsupported(OrbitZetaError):
    pass


class InsufficientData(OrbitZetaError):
    pass


class NotCertified(OrbitZetaError):
    pass


class BadPinching(OrbitZetaError):
    pass


class NegativePressureWindow(UserWarning):
    """Pressure estimate is not positive; the counting asymptotic does not apply."""


# ---------------------------------------------------------------------------
# Zeta functions
# ---------------------------------------------------------------------------

class AbscissaTooClose(OrbitZetaError):
    def __init__(self, message: str, safe_abscissa: Optional[float] = None):
        super().__init__(message)
        self.safe_abscissa = safe_abscissa


class WeightMissing(OrbitZetaError):
    pass


class NoSignChange(OrbitZetaError):
    pass
