"""Exception types shared across the toolkit."""

from __future__ import annotations


class GenaugError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


class ManifestParseError(GenaugError):
    """Manifest file is missing or not valid JSON."""


class ValidationError(GenaugError):
    """A record or annotation violates a dataset invariant."""

    def __init__(self, message: str, record_id: str | None = None) -> None:
        self.record_id = record_id
        if record_id is not None:
            message = f"record {record_id!r}: {message}"
        super().__init__(message)


class ServiceError(GenaugError):
    """A remote service call failed after retries."""
