"""Exception and warning types shared across the package."""


class QQError(ValueError):
    """Base class for errors raised by qqmethod."""


class DomainError(QQError):
    """An argument lies outside the mathematical domain of an operation."""


class InsufficientDataError(QQError):
    """Too few points remain for the requested fit."""


class DegenerateError(QQError):
    """The data carry no spread, so the QQ correlation is undefined."""


class CalibrationError(QQError):
    """The request falls outside the range the calibration models cover."""


class FormatError(QQError):
    """An input file could not be parsed."""


class CalibrationWarning(UserWarning):
    """A result was computed outside the calibrated range of sample sizes."""


class SearchWarning(UserWarning):
    """A shape search found no preference between candidate values."""
