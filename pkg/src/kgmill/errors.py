"""Exception types shared across kgmill modules.

Every error a public operation can raise is defined here so callers (CLI,
HTTP layer, tests) can catch by contract name without importing the module
that raised it.
"""

from __future__ import annotations


class KgmillError(Exception):
    """Base class for all kgmill errors."""


# --- store ---------------------------------------------------------------


class ImportEmpty(KgmillError):
    """Terminology import received an empty row stream."""


class RowRejected(KgmillError):
    """A single malformed import row; collected and counted, never fatal."""

    def __init__(self, row, reason: str):
        super().__init__(f"rejected row {row!r}: {reason}")
        self.row = row
        self.reason = reason


class NotFound(KgmillError):
    """A referenced entity (terminology, code set, run, ...) does not exist."""


class RunClosed(KgmillError):
    """Write attempted against a run that is not in the running state."""


class QueryError(KgmillError):
    """A custom-table query failed to parse or execute."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message if position is None else f"{message} (at offset {position})")
        self.position = position


# --- embeddings ----------------------------------------------------------


class EmbedError(KgmillError):
    """Embedder failed or returned vectors violating its declared contract."""

    retryable = True


class MixedVectors(KgmillError):
    """Vectors from different models or dimensions were combined."""


class ZeroVector(KgmillError):
    """Cosine distance is undefined for a zero vector."""


class DependencyMissing(KgmillError):
    """A required precomputed artifact (e.g. CLS vectors) is absent."""


# --- llm gateway ---------------------------------------------------------


class TemplateError(KgmillError):
    """Prompt template does not contain exactly one concept placeholder."""


class ParseError(KgmillError):
    """Response payload could not be parsed; raw text preserved for audit."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class KeyUnmapped(KgmillError):
    """Response used a dictionary key that is not in the response dictionary."""

    def __init__(self, key: str):
        super().__init__(f"unmapped dictionary key: {key!r}")
        self.key = key


class AccountingError(KgmillError):
    """Usage record was invalid (e.g. negative token counts)."""


class BudgetExceeded(KgmillError):
    """The run's dollar limit was crossed; no further requests may start."""


class TranscriptError(KgmillError):
    """Replay transcript file is malformed or has duplicate prompt keys."""


class ProviderError(KgmillError):
    """Provider failed permanently (after retries, if any)."""


class ProviderTransientError(ProviderError):
    """Provider failure worth retrying."""


class UnknownPrompt(ProviderError):
    """Replay provider saw a prompt absent from its transcript (policy=error)."""


# --- extraction engine ---------------------------------------------------


class AggregationError(KgmillError):
    """Sample list violated the finalization mode's domain."""


class AssessmentError(KgmillError):
    """Beceptivity value could not be determined for a string."""


class ExpansionError(KgmillError):
    """Expansion-string generation failed; the item proceeds unexpanded."""


# --- matcher -------------------------------------------------------------


class EmptySet(KgmillError):
    """Matching was requested against an empty code set."""


# --- service -------------------------------------------------------------


class ConfigError(KgmillError):
    """Configuration file or environment override is invalid."""
