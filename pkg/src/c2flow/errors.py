"""Exception types shared across the package."""


class C2FlowError(Exception):
    """Base class for all library errors."""


class DomainError(C2FlowError, ValueError):
    """Parameters fall outside the region where a formula is defined."""


class DivergenceError(C2FlowError, ArithmeticError):
    """A time integration produced non-finite or runaway values."""

    def __init__(self, message, step=None, field=None):
        super().__init__(message)
        self.step = step
        self.field = field


class ConfigError(C2FlowError, ValueError):
    """Invalid or inconsistent run configuration."""


class NumericalError(C2FlowError, ArithmeticError):
    """A solver failed to meet its accuracy contract."""
