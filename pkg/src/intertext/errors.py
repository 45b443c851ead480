"""Exception types shared across the toolkit.

Parse-time errors carry the 1-based line number of the offending input line;
binary-format errors carry the byte offset at which the problem was detected.
"""

from __future__ import annotations


class IntertextError(Exception):
    """Base class for all toolkit errors."""


class ParseError(IntertextError):
    """Malformed text input (TSV/CSV/JSON line formats)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateKeyError(ParseError):
    """The same verse address appeared twice in one corpus or store."""


class CollisionError(IntertextError):
    """Versification re-keying would overwrite an existing verse."""


class ConfigError(IntertextError):
    """Invalid or inconsistent run configuration."""


class StoreFormatError(IntertextError):
    """Corrupt or unreadable embedding store file."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"byte {offset}: {message}"
        super().__init__(message)


class InvalidVectorError(IntertextError):
    """Zero-norm, non-finite, or dimensionally inconsistent vector."""


class MissingEmbeddingError(IntertextError):
    """A required (corpus, verse) key has no vector in the store."""


class RemoteError(IntertextError):
    """Transport-level failure talking to a remote service, after retries."""


class ProtocolError(IntertextError):
    """Remote service answered, but not in the agreed shape."""


class DegenerateBaselineError(IntertextError):
    """Baseline similarity mean is not positive; inputs are unusable."""


class DegenerateBootstrapError(IntertextError):
    """A bootstrap replicate stayed degenerate past the retry budget."""


class QuoteCollisionError(IntertextError):
    """Text headed into a quote-delimited prompt contains a double quote."""


class EmptyTranslationError(IntertextError):
    """Extraction produced an empty string."""


class InsufficientExemplarsError(IntertextError):
    """Fewer candidate pairs than the prompt template needs."""
