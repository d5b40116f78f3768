"""Exception types raised across the package."""


class BayesDDError(Exception):
    """Base class for all errors raised by bayesdd."""


class DimensionMismatchError(BayesDDError, ValueError):
    def __init__(self, left, right, what="feature dimension"):
        self.left = left
        self.right = right
        super().__init__(f"{what} mismatch: {left} != {right}")


class EmptyDatasetError(BayesDDError, ValueError):
    pass


class InfeasibleError(BayesDDError, ValueError):
    """The capped simplex {0 <= a_i <= u, sum(a) = 1} is empty."""


class NotPositiveDefiniteError(BayesDDError, ValueError):
    def __init__(self, pivot):
        self.pivot = pivot
        super().__init__(
            f"matrix is not positive definite: Cholesky failed at pivot {pivot}")


class ParameterError(BayesDDError, ValueError):
    pass


class ParseError(BayesDDError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NoBoundarySupportVectorError(BayesDDError, RuntimeError):
    pass


class ConvergenceWarning(UserWarning):
    """The QP solver hit its iteration cap before meeting the KKT tolerance."""
