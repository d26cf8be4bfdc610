"""Exception hierarchy shared across the package."""


class NFDMError(Exception):
    """Base class for all package errors."""


class InvalidGridError(NFDMError, ValueError):
    pass


class UndefinedMeasureError(NFDMError, ValueError):
    pass


class DomainError(NFDMError, ValueError):
    """Input outside the mathematical domain of an operation (e.g. |qhat| >= 1)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ApplicabilityError(NFDMError, ValueError):
    """Discrete layer-peeling preconditions violated."""


class NumericFailureError(NFDMError, ArithmeticError):
    pass


class SingularUpdateError(NumericFailureError):
    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class DivergenceError(NumericFailureError):
    def __init__(self, message, cell=None, amplitude=None):
        super().__init__(message)
        self.cell = cell
        self.amplitude = amplitude


class StepSizeError(NFDMError, ValueError):
    def __init__(self, message, suggested_steps=None):
        super().__init__(message)
        self.suggested_steps = suggested_steps


class ConfigError(NFDMError, ValueError):
    pass


class ResourceBudgetError(NFDMError, RuntimeError):
    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
