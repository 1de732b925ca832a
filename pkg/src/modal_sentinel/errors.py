"""Exception hierarchy.

Each family maps to one CLI exit code (see :mod:`modal_sentinel.cli`).
"""


class ModalSentinelError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ModalSentinelError, ValueError):
    """Invalid input values or configuration (exit code 2)."""


class ConfigError(ValidationError):
    """A configuration field failed validation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SnapshotFormatError(ModalSentinelError):
    """Malformed snapshot, metadata or frame file (exit code 3)."""


class NumericalError(ModalSentinelError, ArithmeticError):
    """A numerical procedure failed or hit a degenerate case (exit code 4)."""


class RootFindingError(NumericalError):
    def __init__(self, mode: int, message: str = "bisection did not converge"):
        self.mode = mode
        super().__init__(f"mode {mode}: {message}")


class OverdampedError(NumericalError):
    def __init__(self, mode: int, zeta: float):
        self.mode = mode
        self.zeta = zeta
        super().__init__(
            f"mode {mode} is overdamped (zeta={zeta:.4g} >= 1); "
            "synthesis requires underdamped modes"
        )


class ResolutionError(ValidationError):
    """Sampling grid too coarse to resolve a retained mode."""

    def __init__(self, mode: int, points_per_wavelength: float, required: float):
        self.mode = mode
        super().__init__(
            f"grid resolves mode {mode} with {points_per_wavelength:.1f} points per "
            f"wavelength; at least {required:g} required"
        )


class DegenerateBaselineError(NumericalError):
    def __init__(self, kind: str, mode: int):
        self.kind = kind
        self.mode = mode
        super().__init__(
            f"zero-variance healthy feature vector (kind {kind}, mode {mode}); "
            "baseline is degenerate"
        )


class MatchingError(ModalSentinelError):
    """Baseline modes could not be paired with current modes (exit code 5)."""
