"""Exception hierarchy shared by all modules."""


class AnnihilationError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(AnnihilationError, ValueError):
    """An argument lies outside the domain of a singular function."""


class OrderingError(DomainError):
    """Particle positions are not strictly increasing."""


class StepFailure(AnnihilationError, RuntimeError):
    """The adaptive step size dropped below ``h_min`` without an accepted step.

    Usually means the state has entered the collision layer and must be
    handed to the collision handling.
    """


class IllConditionedFit(AnnihilationError, ValueError):
    """A power-law extrapolation could not be performed reliably."""


class InsufficientWindowError(AnnihilationError, ValueError):
    """A fit window does not contain enough samples or decades."""


class AlternatingSignError(AnnihilationError, ValueError):
    """A collision cluster does not have alternating signs."""

    def __init__(self, message, signs=None, labels=None):
        super().__init__(message)
        self.signs = signs
        self.labels = labels


class ConfigError(AnnihilationError, ValueError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
