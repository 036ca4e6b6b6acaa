"""Exception hierarchy shared by every solver module."""

from __future__ import annotations


class DimensionError(ValueError):
    """Array length or grid mismatch between operands."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation (negative time, too few points, ...)."""


class AlignmentError(ValueError):
    """A period is not an integer multiple of the snapshot spacing."""


class EvaluationError(FloatingPointError):
    """A user nonlinearity produced non-finite output."""

    def __init__(self, term: str, message: str | None = None) -> None:
        self.term = term
        super().__init__(message or f"non-finite values produced by nonlinearity term {term!r}")


class StepFailure(RuntimeError):
    """A time step could not be completed."""

    def __init__(self, message: str, residual: float | None = None, time: float | None = None) -> None:
        self.residual = residual
        self.time = time
        super().__init__(message)


class BlowUpError(StepFailure):
    """The H^1 norm exceeded the blow-up guard."""


class NonConvergenceError(RuntimeError):
    """An iteration (Picard, period map) exhausted its budget."""

    def __init__(self, message: str, history: list[float] | None = None) -> None:
        self.history = list(history or [])
        super().__init__(message)


class OutsideRegimeError(NonConvergenceError):
    """Contraction ratios stayed at or above one: the data is outside the small-data regime."""


class ConfigError(ValueError):
    """Experiment configuration failed validation."""
