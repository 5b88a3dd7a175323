"""Exception hierarchy.

Every error raised on purpose by this package derives from ``VecAssocError``
and from ``ValueError`` so plain ``except ValueError`` callers keep working.
"""


class VecAssocError(ValueError):
    """Base class for all package errors."""


class InvalidInputError(VecAssocError):
    """Input shape, range or content is not acceptable."""


class DegenerateInputError(VecAssocError):
    """An estimator is undefined on the data (e.g. a zero-variance score)."""


class ParameterError(VecAssocError):
    """A model or configuration parameter violates its constraints."""


class InsufficientDataError(VecAssocError):
    """Too few usable observations for the requested computation."""
