"""
Error hierarchy for the homogenization laboratory.
"""

from typing import Optional


class HomogenizationError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(HomogenizationError, ValueError):
    """An argument violates a documented precondition."""


class NumericalFailureError(HomogenizationError, ArithmeticError):
    """An energy or iterate became non-finite during a solve."""


class UnderResolvedError(HomogenizationError, ValueError):
    """A grid or binning is too coarse for the requested operation."""


class EmptyFeasibleSetError(HomogenizationError):
    """Every candidate of a constrained family was rejected."""


class ConfigError(HomogenizationError):
    """Invalid experiment configuration.

    Args:
        message: Human readable reason
        path: Dotted path to the failing key (e.g. ``"epsilon_list"``)
    """

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
