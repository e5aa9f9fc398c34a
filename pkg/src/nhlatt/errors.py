"""
Exception hierarchy shared by every module.

Invalid inputs derive from ``InvalidParameterError`` (a ``ValueError``) and
map to exit code 1 on the command line. Numerical breakdowns derive from
``NumericalError`` (a ``RuntimeError``) and map to exit code 2.
"""

from pathlib import Path


class LatticeError(Exception):
    """Base class for all nhlatt errors."""


class InvalidParameterError(LatticeError, ValueError):
    pass


class DimensionMismatchError(InvalidParameterError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"dimension mismatch: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class OverlapViolationError(InvalidParameterError):
    def __init__(self, overlap: float, threshold: float):
        super().__init__(
            f"wavepacket overlap with edges/impurity {overlap:.3e} exceeds {threshold:.1e}"
        )
        self.overlap = overlap
        self.threshold = threshold


class NoValidWindowError(InvalidParameterError):
    pass


class NumericalError(LatticeError, RuntimeError):
    pass


class NoConvergenceError(NumericalError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class RootCountMismatchError(NumericalError):
    def __init__(self, expected: int, converged: int):
        super().__init__(
            f"root finder converged on {converged} of {expected} roots"
        )
        self.expected = expected
        self.converged = converged


class LargeResidualError(NumericalError):
    def __init__(self, residual: float, threshold: float):
        super().__init__(
            f"relative eigen-residual {residual:.3e} exceeds {threshold:.1e}"
        )
        self.residual = residual


class NoMinimumError(NumericalError):
    pass


class NoBoundStateError(NumericalError):
    pass


class StepUnderflowError(NumericalError):
    def __init__(self, dt: float, time: float):
        super().__init__(f"time step underflow: dt={dt:.3e} at t={time:.6g}")
        self.dt = dt
        self.time = time


class PoorFitError(NumericalError):
    def __init__(self, r_squared: float, threshold: float):
        super().__init__(f"localization fit r^2={r_squared:.6f} below {threshold}")
        self.r_squared = r_squared


class WindowTooSmallError(NumericalError):
    pass


class MaxAtBoundaryError(NumericalError):
    pass


class UnclassifiableError(NumericalError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ExportError(LatticeError, OSError):
    def __init__(self, path: Path, reason: str):
        super().__init__(f"cannot write {path}: {reason}")
        self.path = path
