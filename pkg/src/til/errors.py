"""Exception types raised across the package."""


class TilError(Exception):
    """Base class for all errors raised by til."""


class InputError(TilError, ValueError):
    pass


class ConfigError(TilError):
    pass


class OracleError(TilError):
    def __init__(self, oracle, x, message="non-finite output"):
        self.oracle = oracle
        self.x = x
        super().__init__(f"{oracle} oracle: {message} at x={x!r}")


class TruncationWarning(TilError, UserWarning):
    """Raised when a truncated domain leaves more than the tail-mass budget."""


class TruncationError(TilError):
    pass


class GridError(TilError):
    pass


class AlignmentError(TilError):
    pass


class PerturbationError(TilError):
    pass


class DomainError(TilError, ValueError):
    pass


class SizeError(TilError):
    pass


class MarginalError(TilError):
    pass


class ConvergenceError(TilError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class DimensionError(TilError):
    pass


class MapDegeneracyError(TilError):
    pass


class NumericalError(TilError):
    pass


class SingularHessianError(TilError):
    pass


class DegenerateRemainderError(TilError):
    pass
