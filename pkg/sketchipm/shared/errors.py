"""
Error hierarchy for sketchipm

Every failure the library can signal derives from SketchIpmError so callers
(and the CLI) can map them to exit codes in one place.
"""

from typing import Any, Optional


class SketchIpmError(Exception):
    """Base class for all sketchipm errors"""

    def __init__(self, message: str = ""):
        super().__init__(message)
        # Filled in by ipm_solve when the error escapes the outer loop
        self.trace: Optional[Any] = None
        self.iterate: Optional[Any] = None


class InvalidParameter(SketchIpmError, ValueError):
    """A configuration value is outside its admissible range"""


class DimensionMismatch(SketchIpmError, ValueError):
    """Operand shapes do not conform"""


class NonFiniteInput(SketchIpmError, ValueError):
    """Input contains NaN or infinite values"""


class AsymmetricMatrix(SketchIpmError, ValueError):
    """Matrix expected to be symmetric is not (beyond tolerance)"""


class NotOrthonormal(SketchIpmError, ValueError):
    """Matrix expected to have orthonormal rows does not"""


class RankDeficient(SketchIpmError):
    """Sketched matrix ADW lost rank; the sketch failed to embed row space of AD"""

    def __init__(self, message: str = "", sigma_min: float = 0.0, sigma_max: float = 0.0):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max


class InnerSolverBreakdown(SketchIpmError):
    """Non-positive curvature met by CG or steepest descent"""


class InnerSolverDiverged(SketchIpmError):
    """Residual kept growing during Richardson iteration"""


class CorrectionIdentityViolated(SketchIpmError):
    """AS^{-1}v differs from AD^2A^T dy - p beyond tolerance"""

    def __init__(self, message: str = "", residual: float = 0.0, bound: float = 0.0):
        super().__init__(message)
        self.residual = residual
        self.bound = bound


class ProblemFormatError(SketchIpmError, ValueError):
    """Malformed problem or dataset file"""

    def __init__(self, message: str = "", field: Optional[str] = None, line: Optional[int] = None):
        details = []
        if line is not None:
            details.append(f"line {line}")
        if field is not None:
            details.append(f"field '{field}'")
        if details:
            message = f"{', '.join(details)}: {message}"
        super().__init__(message)
        self.field = field
        self.line = line


class IpmFailure(SketchIpmError):
    """Outer loop ended without reaching the tolerance"""


class Stalled(IpmFailure):
    """Step size was zero on two consecutive outer iterations"""


class MaxOuterExceeded(IpmFailure):
    """Outer iteration budget exhausted before mu <= epsilon"""
