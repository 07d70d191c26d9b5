"""Exception types raised across the package.

Two broad families: ValidationError covers bad inputs and malformed files
(CLI exit code 2), NumericError covers runtime numeric failures (exit code 3).
"""

from __future__ import annotations


class TsdenoiseError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(TsdenoiseError, ValueError):
    """Invalid argument, malformed data, or a broken precondition."""


class MalformedRow(ValidationError):
    """A CSV row that cannot be parsed. Carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class NonPositivePrice(ValidationError):
    """A price that must be strictly positive is <= 0."""


class DuplicateTimestamp(ValidationError):
    """Two rows share a timestamp."""


class SeriesTooShort(ValidationError):
    """A series is shorter than the operation requires."""


class EmptyInput(ValidationError):
    """An input collection that must be nonempty is empty."""


class IndexOutOfRange(ValidationError, IndexError):
    """An index or horizon points outside the available range."""


class BadParams(ValidationError):
    """Parameters outside their documented domain."""


class WrongKind(ValidationError):
    """An operation was handed an object of the wrong kind."""


class OutOfRangeT(ValidationError):
    """A diffusion time outside (0, T]."""


class ShapeMismatch(ValidationError):
    """Array shapes that must agree do not."""


class Misalignment(ValidationError):
    """Two series that must be aligned are not."""


class SingleClass(ValidationError):
    """A classifier training set with fewer than two classes."""


class UndefinedMetric(ValidationError):
    """A metric evaluated on a configuration where it has no value."""


class ConfigError(ValidationError):
    """A run configuration that fails strict parsing."""


class IoError(TsdenoiseError):
    """A model or data file that cannot be read or is truncated."""


class VersionMismatch(IoError):
    """A file written by an incompatible format version."""


class NumericError(TsdenoiseError):
    """Numeric failure during training or sampling."""


class DivergedLoss(NumericError):
    """Training loss became non-finite."""


class NonFiniteState(NumericError):
    """A sampler state picked up NaN or Inf."""
