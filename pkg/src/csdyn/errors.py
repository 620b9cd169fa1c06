"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment or algorithm configuration."""


class NumericalAbort(RuntimeError):
    """A theory predictor could not continue (failed factorization, non-finite values).

    ``partial`` carries whatever was computed before the abort.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InternalConsistencyError(ArithmeticError):
    """An algebraic identity that must hold to round-off was violated."""


class EmptyZeroSupportError(ValueError):
    """MSEZ requested for a signal with no exactly-zero components."""
