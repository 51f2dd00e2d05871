"""Exception hierarchy shared by all modules."""


class MHTError(Exception):
    """Base class for every error raised by this package."""


class DegenerateInput(MHTError, ValueError):
    pass


class InvalidOperator(MHTError, ValueError):
    pass


class DomainError(MHTError, ValueError):
    pass


class ModelOrderError(MHTError, ValueError):
    pass


class ModelViolation(MHTError, ValueError):
    pass


class NumericalError(MHTError, ArithmeticError):
    """Non-finite objective or failed factorization.

    ``index`` points at the offending sample when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class EmptySample(MHTError, ValueError):
    pass


class ShapeError(MHTError, ValueError):
    pass


class ConfigError(MHTError, ValueError):
    """Raised with the full list of violations found in a run config."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
