"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ToolkitError, ValueError):
    """Matrix or signal dimensions are inconsistent with the operation."""


class ParameterError(ToolkitError, ValueError):
    """A scalar parameter violates its contract (sign, range, ordering)."""


class CertificateError(ToolkitError):
    """A requested certificate does not exist or a candidate fails.

    Diagnostic values (offending eigenvalue, rank, margin, ...) are kept in
    the ``info`` dict so callers can report them.
    """

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = dict(info)


class NotDetectableError(CertificateError):
    """The observability stack is rank deficient at the requested window."""


class DivergenceError(ToolkitError):
    """A simulated state became non-finite; ``step`` records where."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class WellPosednessError(ToolkitError):
    """The feedback loop has an unsolvable algebraic loop."""


class ContractViolationError(ToolkitError):
    """An input violated a caller-side contract (e.g. off-grid input)."""


class ConfigError(ToolkitError, ValueError):
    """An analysis configuration failed validation; message carries the path."""
