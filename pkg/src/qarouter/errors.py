"""Exception hierarchy shared across the router.

Every domain failure derives from QaRouterError so callers (batch pipeline,
CLI) can catch one base class and report the stage that failed.
"""


class QaRouterError(Exception):
    """Base class for all domain errors raised by this package."""


# --- text preparation ---

class UnanswerableInput(QaRouterError):
    """Question text is empty (or becomes empty after normalization)."""


# --- classifier ---

class TrainingDataError(QaRouterError):
    """Training corpus is unusable (missing a label class, bad row, ...)."""


class CorpusTooSmall(QaRouterError):
    """Not enough examples for the requested number of folds."""


# --- retriever ---

class DuplicatePassageId(QaRouterError):
    """Two passages with the same id were offered to the index."""


class UnknownPassageId(QaRouterError):
    """A passage id was requested that the index does not contain."""


# --- reader ---

class NoAnswer(QaRouterError):
    """No passage shares a single token with the question."""


# --- nl2sql ---

class NoRuleMatched(QaRouterError):
    """No translation rule fired for the question."""


# --- ipc ---

class SpoolUnavailable(QaRouterError):
    """Spool root or a required subdirectory is missing or unreadable."""


class SerializationError(QaRouterError):
    """Message payload could not be serialized to JSON."""


class UnknownRequestId(QaRouterError):
    """respond() was called for a request this consumer never claimed."""


class ExternalTimeout(QaRouterError):
    """No response file appeared before the deadline."""


class MalformedBackendResponse(QaRouterError):
    """A backend produced output that violates the wire contract."""


# --- evalkit ---

class EmptyEvaluation(QaRouterError):
    """Metric requested over zero records."""


class LengthMismatch(QaRouterError):
    """Prediction and gold lists have different lengths."""


# --- pipeline ---

class EmptyBatch(QaRouterError):
    """answer_batch() received an empty question list."""


class StageError(QaRouterError):
    """Wraps a failure with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
