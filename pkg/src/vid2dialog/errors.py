"""Exception hierarchy shared across pipeline stages."""

from __future__ import annotations


class Vid2DialogError(Exception):
    """Base class for all package errors."""


class ParseError(Vid2DialogError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(Vid2DialogError):
    """Input table or record does not match its declared schema."""


class ManifestError(Vid2DialogError):
    """Source manifest is invalid (duplicate ids, missing required fields)."""


class ConfigError(Vid2DialogError):
    """Bad configuration: missing credential, unknown backend, bad template."""


class TransportError(Vid2DialogError):
    """Backend unreachable after retries."""

    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt(s))")


class StructuredOutputError(Vid2DialogError):
    """Model output never validated against the requested schema.

    Keeps the last raw response so quality control can log the failed
    generation.
    """

    def __init__(self, message: str, raw_text: str, attempts: int):
        self.raw_text = raw_text
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt(s))")


class StageError(Vid2DialogError):
    """A pipeline stage failed for one source/session; the run skips it."""


class LocalizationError(StageError):
    """Temporal localization failed (empty spans, inverted or zero-length span)."""
