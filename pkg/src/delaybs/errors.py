"""Exception hierarchy shared across the library."""


class DelayBsError(Exception):
    """Base class for all library errors."""


class DomainError(DelayBsError):
    """An argument is outside the mathematical domain of an operation."""


class ContractError(DelayBsError):
    """A caller violated a documented precondition."""


class ConfigError(DelayBsError):
    """A configuration file or market definition is invalid."""


class NumericalError(DelayBsError):
    """An internal numerical consistency check failed."""


class IntegrationFailure(DelayBsError):
    """A path integrator produced a non-finite state."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index
