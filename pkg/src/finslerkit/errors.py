"""Exception types raised by finslerkit."""

import numpy as np


class FinslerError(Exception):
    """Base class for library errors."""


class InvalidNormError(FinslerError, ValueError):
    """Norm parameters violate the family's constraints."""


class NumericalFailure(FinslerError, ArithmeticError):
    """A computation produced non-finite values."""


class NotPositiveDefiniteError(FinslerError):
    """An averaged form failed the positive-definiteness threshold.

    ``min_eig`` is the offending eigenvalue and ``witness`` its eigenvector.
    """

    def __init__(self, message, min_eig, witness, where=None):
        super().__init__(message)
        self.min_eig = float(min_eig)
        self.witness = np.asarray(witness)
        self.where = where


class FlowEscapeError(FinslerError):
    """A flow trajectory left its chart or became non-finite."""


class DegenerateSamplingError(FinslerError, ValueError):
    """Sample configuration too degenerate for the requested fit or test."""
