"""Exception hierarchy shared across the package."""
from __future__ import annotations


class CitecheckError(Exception):
    """Base class for all package errors."""


class UnknownLabel(CitecheckError):
    """Verdict text is not one of the three accepted labels."""


class Unparseable(CitecheckError):
    """No retrieval signal could be extracted from a citation string."""


class BackendError(CitecheckError):
    """LLM backend transport failure."""


class MalformedResponse(CitecheckError):
    """LLM backend returned output that does not match the required schema."""


class TransportError(CitecheckError):
    """HTTP transport failure (network error, unexpected status)."""


class RateLimitedExhausted(TransportError):
    """All retry attempts returned HTTP 429."""


class ReplayMiss(TransportError):
    """Replay transport has no fixture for the requested call."""


class NotFound(CitecheckError):
    """Upstream source has no record for the given identifier or query."""


class ParseError(CitecheckError):
    """Upstream payload could not be parsed into a candidate record."""


class AbstractNotFound(CitecheckError):
    """Every abstract retrieval tier was exhausted without an acceptance."""

    def __init__(self, message: str, attempts=()):
        super().__init__(message)
        self.attempts = list(attempts)


class FullTextNotFound(CitecheckError):
    """Every full-text retrieval tier was exhausted without an acceptance."""

    def __init__(self, message: str, attempts=()):
        super().__init__(message)
        self.attempts = list(attempts)


class UnsupportedFormat(CitecheckError):
    """Document format outside the pdf/xml/html set."""


class ExtractionFailed(CitecheckError):
    """Document bytes could not be converted to text."""


class EmptyDocument(CitecheckError):
    """Chunking was asked to split an empty document."""


class ProviderError(CitecheckError):
    """Embedding provider failure."""


class DimensionMismatch(ProviderError):
    """Embedding provider returned vectors of differing dimensions."""


class InvalidRanges(CitecheckError):
    """Line ranges are out of bounds, inverted, or overlapping."""


class InvalidInput(CitecheckError):
    """Operation precondition violated by the caller."""


class LengthMismatch(CitecheckError):
    """Prediction and gold sequences differ in length."""


class EmptyInput(CitecheckError):
    """Metric computation received no label pairs."""


class MissingGold(CitecheckError):
    """A result lacks the gold label required by the report."""
