"""Package exceptions."""

import typing as t

__all__ = [
    "TadpoleError",
    "ParameterError",
    "ShapeError",
    "PoleProximityError",
    "SingularityError",
    "DivergenceError",
    "ContourError",
    "IllConditionedBasisError",
    "OutOfSpanError",
    "ResonanceModeError",
    "TailTooLargeError",
    "PacketTruncationError",
    "SolverError",
    "ConfigError",
]


class TadpoleError(ValueError):
    """Base error of the package."""


class ParameterError(TadpoleError):
    """Invalid problem instance or run parameter."""


class ShapeError(TadpoleError):
    """Sampled arrays do not match the grids."""


class PoleProximityError(TadpoleError):
    """A denominator is too close to zero to carry significant digits."""

    def __init__(self, factor: str, magnitude: float):
        self.factor = factor
        self.magnitude = magnitude
        super().__init__(f"Pole proximity: |{factor}| = {magnitude:.3e}")


class SingularityError(TadpoleError):
    """Evaluation at a removable or essential singularity of a closed form."""


class DivergenceError(TadpoleError):
    """Iteration did not converge."""

    def __init__(self, message: str, trace: t.Sequence[complex] = ()):
        self.trace = list(trace)
        super().__init__(message)


class ContourError(TadpoleError):
    """Contour passes too close to a root."""


class IllConditionedBasisError(TadpoleError):
    """Gram matrix condition number too large for an expansion."""


class OutOfSpanError(TadpoleError):
    """Initial data is not represented by the supplied modes."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Initial data out of the modal span, relative residual {residual:.3e}")


class ResonanceModeError(TadpoleError):
    """A mode that is not square-integrable was passed where an eigenfunction is required."""


class TailTooLargeError(TadpoleError):
    """Data does not decay before the end of the truncated half-line."""


class PacketTruncationError(TadpoleError):
    """Weyl packet does not fit on the truncated half-line."""


class SolverError(TadpoleError):
    """Linear or eigen solver failure."""


class ConfigError(TadpoleError):
    """Invalid run configuration."""
