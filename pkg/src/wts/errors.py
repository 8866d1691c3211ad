"""Exception types shared across the package."""

from __future__ import annotations


class WtsError(Exception):
    """Base class for every error raised by this package."""


class EmptyFieldError(WtsError, ValueError):
    """A required text field normalized to the empty string."""


class StoreFormatError(WtsError, ValueError):
    """A persisted triple file contains a malformed record."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DimensionMismatchError(WtsError, ValueError):
    """Two vectors of different dimensionality were combined."""


class ZeroVectorError(WtsError, ValueError):
    """An all-zero vector has no direction and cannot be compared."""


class EmptyTextError(WtsError, ValueError):
    """Text to embed normalized to the empty string."""


class MalformedReplyError(WtsError):
    """A model reply could not be parsed into the expected shape.

    Raised only after the configured number of retries is exhausted.
    ``raw`` keeps the last offending reply for logging.
    """

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class ScriptExhaustedError(WtsError):
    """A scripted mock client ran past the end of its script."""


class UpstreamServiceError(WtsError):
    """A remote model or embedding endpoint failed after all retries."""


class DatasetFormatError(WtsError, ValueError):
    """A dataset file contains a malformed record."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class KindMismatchError(WtsError, ValueError):
    """A dataset record does not fit the declared source's answer format."""


class LengthMismatchError(WtsError, ValueError):
    """Paired sequences of different lengths were passed to a metric."""


class EmptyInputError(WtsError, ValueError):
    """A metric was called with nothing to score."""
