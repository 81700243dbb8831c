"""Exception hierarchy shared by all modules.

Every error raised on purpose derives from :class:`EvtolError`, so callers
(and the CLI) can separate configuration mistakes from infeasible designs.
"""


class EvtolError(Exception):
    """Base class for package errors."""


class ValidationError(EvtolError, ValueError):
    """An input violates a documented invariant."""


class DomainError(ValidationError):
    """A numeric argument lies outside the domain of a formula."""


class ConfigError(EvtolError):
    """A configuration or data file is malformed or inconsistent."""


class InfeasibleError(EvtolError):
    """The requested design point cannot be realised."""


class CapacityExceededError(InfeasibleError):
    """The required current exceeds the largest catalog cable."""


class DepletionError(InfeasibleError):
    """The pack ran empty during a mission simulation."""

    def __init__(self, message, t_s):
        super().__init__(message)
        self.t_s = t_s


class MeasurementError(ValidationError):
    """Thermal measurements are physically inconsistent."""


class FitError(EvtolError):
    """A regression is underdetermined."""
