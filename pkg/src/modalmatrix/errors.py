"""Exception hierarchy shared across the package."""


class ModalMatrixError(Exception):
    """Base class for all package errors."""


class DimensionError(ModalMatrixError, ValueError):
    """Matrix shapes or kernel dimensions do not agree."""


class ParameterError(ModalMatrixError, ValueError):
    """An argument is outside its admissible range."""


class DomainError(ModalMatrixError, ValueError):
    """A scalar function was evaluated outside its domain."""


class DegenerateBandwidthError(ModalMatrixError, ArithmeticError):
    """A nearest-neighbour radius collapsed to zero.

    ``indices`` lists the offending dataset positions (empty for a query point).
    """

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)


class IsolatedPointError(ModalMatrixError, ArithmeticError):
    """Mean-shift weights have no finite mass."""


class UndefinedMetricError(ModalMatrixError, ValueError):
    """A clustering metric is undefined for the given partition."""
