"""Exception hierarchy for the annotation pipeline.

Every error the package raises on purpose derives from RiskTaggerError so
callers can split pipeline failures from genuine bugs with one except clause.
"""


class RiskTaggerError(Exception):
    """Base class for all deliberate pipeline errors."""


class MalformedAddress(RiskTaggerError):
    """Address string failed normalization (length, charset, or prefix)."""


class UnknownChain(RiskTaggerError):
    """Chain id is syntactically valid but no adapter/fixture covers it."""


class ChainUnavailable(RiskTaggerError):
    """Upstream chain API kept failing after all retry attempts."""


class RateLimited(RiskTaggerError):
    """Upstream chain API refused the request rate."""

    def __init__(self, message: str, retry_after_s: float = 0.0):
        super().__init__(message)
        self.retry_after_s = retry_after_s


class SchemaMismatch(RiskTaggerError):
    """Fixture CSV header does not match the canonical 16-column schema."""


class ParseError(RiskTaggerError):
    """A fixture row or config value could not be parsed; carries location."""


class EmptyDocument(RiskTaggerError):
    """Document splitter got empty or whitespace-only input."""


class MissingPlaceholder(RiskTaggerError):
    """Prompt rendering was asked to proceed without a required value."""


class PromptHashMismatch(RiskTaggerError):
    """A prompt template on disk does not match its pinned hash."""


class UnparseableVerdict(RiskTaggerError):
    """No well-formed JSON object could be recovered from backend output."""


class SchemaViolation(RiskTaggerError):
    """Verdict JSON parsed but is missing required keys or uses unknown values."""


class BackendFailure(RiskTaggerError):
    """Reasoning backend failed (HTTP error, timeout, empty completion)."""


class EmptyChecklist(RiskTaggerError):
    """Coverage scoring needs at least one expected entity."""


class CheckpointError(RiskTaggerError):
    """Checkpoint file missing or inconsistent on resume."""
