"""Exception types shared across the package."""


class PercofaceError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PercofaceError):
    """A parameter is outside its admissible range."""


class ContractViolation(PercofaceError):
    """A documented precondition does not hold for the given input."""


class CapExceeded(PercofaceError):
    """An exact enumeration would exceed the configured size cap."""

    def __init__(self, message: str, required: int, cap: int):
        super().__init__(message)
        self.required = required
        self.cap = cap


class WindowTooSmall(PercofaceError):
    """A reconstruction or backward search fell out of the retained history window."""
