"""Exception types raised across the package."""

import numpy as np


class GPClustError(Exception):
    """Base class for package errors."""


class DomainError(GPClustError, ValueError):
    """Input outside the domain of an operation."""


class NotPositiveDefiniteError(GPClustError, np.linalg.LinAlgError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"matrix is not positive definite (pivot {self.index})")


class NumericalError(GPClustError, ArithmeticError):
    """A computation produced a non-finite or invalid value."""

    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class DegenerateComponentError(GPClustError):
    """A mixture component kept losing all of its mass."""

    def __init__(self, component, message=None):
        self.component = int(component)
        super().__init__(
            message or f"component {self.component} collapsed (no responsibility mass)"
        )


class ParseError(GPClustError, ValueError):
    """Malformed input file."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where += f" row {row}"
        if column is not None:
            where += f" column {column}"
        super().__init__(f"{message}{' at' + where if where else ''}")


class EmptyDatasetError(ParseError):
    """File contains a header but no data rows."""
