"""Exception hierarchy shared across the package."""


class CovDlmError(Exception):
    """Base class for all covdlm errors."""


class NonFiniteInput(CovDlmError):
    """An input array contains NaN or infinite entries."""


class NotSymmetric(CovDlmError):
    """A matrix required to be symmetric is not, beyond tolerance."""


class NotPositiveDefinite(CovDlmError):
    """A matrix has an eigenvalue below the negative tolerance band."""


class Singular(CovDlmError):
    """A matrix that must be inverted is numerically singular."""


class DimensionMismatch(CovDlmError):
    """Array shapes are inconsistent with the model dimensions."""


class InvalidDimension(CovDlmError):
    """A dimension argument is out of its valid range."""


class InvalidDiscount(CovDlmError):
    """A discount factor lies outside (0, 1]."""


class InvalidScale(CovDlmError):
    """A scalar scale or count that must be positive is not."""


class UnsupportedHorizon(CovDlmError):
    """Forecast horizon below 1."""


class TimeVaryingDesign(CovDlmError):
    """Operation needs a fixed design matrix but the model's is per-time."""


class InsufficientData(CovDlmError):
    """Too few observations for the requested model."""


class ParseError(CovDlmError):
    """CSV input could not be parsed; message carries row/column."""


class DivisionByZero(CovDlmError):
    """Percentage error undefined because an actual value is zero."""


class ValidationError(CovDlmError):
    """A run configuration failed validation; message names the field."""
