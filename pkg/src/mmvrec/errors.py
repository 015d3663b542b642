"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An input violates a documented precondition (bad shape, bad range, ...)."""


class DivergenceError(RuntimeError):
    """A solver produced a non-finite value; carries the iteration index."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class NonConvergenceError(RuntimeError):
    """A solver hit its iteration cap without meeting its optimality test."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EvaluationError(RuntimeError):
    """An objective could not be evaluated (e.g. singular model covariance)."""


class MatrixIOError(IOError):
    """Base class for ``.cmat`` interchange-file problems."""


class MatrixFormatError(MatrixIOError):
    """Malformed or missing ``.cmat`` header."""


class MatrixTruncatedError(MatrixIOError):
    """Payload shorter than the header promises."""

    def __init__(self, message, expected_bytes=None, found_bytes=None):
        super().__init__(message)
        self.expected_bytes = expected_bytes
        self.found_bytes = found_bytes


class MatrixValueError(MatrixIOError):
    """Payload contains NaN/Inf, or the header declares an empty matrix."""
