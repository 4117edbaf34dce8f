"""Exception types shared across the toolkit."""

from __future__ import annotations


class VarmatchError(Exception):
    """Base class for all toolkit errors."""

    category = "internal"


class ConfigError(VarmatchError):
    """Invalid run configuration; carries every violated field."""

    category = "config"

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations))


class DataError(VarmatchError):
    """Input data violates a documented contract."""

    category = "data"


class IngestError(DataError):
    """Hard catalog-ingest failure (conflicting duplicate, dangling reference)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PoolExhaustedError(DataError):
    """A negative-sampling bucket has fewer candidates than requested."""

    def __init__(self, bucket: str, requested: int, available: int):
        self.bucket = bucket
        self.requested = requested
        self.available = available
        super().__init__(
            f"bucket '{bucket}' pool exhausted: requested {requested}, "
            f"only {available} candidate pairs available"
        )


class TransportError(VarmatchError):
    """Remote call failed after the full retry budget."""

    category = "transport"

    def __init__(self, message: str, attempts: int):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt(s))")


class ResponseParseError(VarmatchError):
    """A backend or model response could not be interpreted; raw payload attached."""

    category = "parse"

    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(f"{message}; raw response: {raw[:200]!r}")
