"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""


# --- gateway ---------------------------------------------------------------

class GatewayError(EngineError):
    """Provider-side completion failure."""


class GatewayTimeout(GatewayError):
    pass


class ProviderError(GatewayError):
    def __init__(self, status: int, body_excerpt: str = ""):
        super().__init__(f"provider returned status {status}: {body_excerpt[:200]}")
        self.status = status
        self.body_excerpt = body_excerpt[:200]


class BudgetExceeded(GatewayError):
    pass


class TemplateError(EngineError):
    pass


class MissingSlot(TemplateError):
    def __init__(self, slot: str):
        super().__init__(f"missing or empty slot: {slot}")
        self.slot = slot


class UnknownSlot(TemplateError):
    def __init__(self, slot: str):
        super().__init__(f"unknown slot: {slot}")
        self.slot = slot


class ParseError(EngineError):
    """Completion could not be parsed into the requested shape."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


# --- knowledge store -------------------------------------------------------

class SchemaError(EngineError):
    """Record or response violates a structural contract."""


class DuplicateInBatch(EngineError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate record id in batch: {record_id}")
        self.record_id = record_id


# --- ranking ---------------------------------------------------------------

class EmptyPairSet(EngineError):
    pass


class NoOrderedPairs(EngineError):
    pass


class DivergenceError(EngineError):
    pass


class EmptyCandidates(EngineError):
    pass


# --- pipeline --------------------------------------------------------------

class EmptyInput(EngineError):
    pass


class SearchProviderError(EngineError):
    pass


class IndexOutOfRange(EngineError):
    pass


class OutOfOrderEdit(EngineError):
    pass


class StagePreconditionError(EngineError):
    """A pipeline operation was invoked before its prerequisites held."""


# --- evaluation ------------------------------------------------------------

class LengthMismatch(EngineError):
    pass


class ZeroVariance(EngineError):
    pass


class UnmatchedItems(EngineError):
    pass


# --- sft -------------------------------------------------------------------

class AlignmentError(EngineError):
    pass


# --- service ---------------------------------------------------------------

class NotFound(EngineError):
    pass


class CorruptLog(EngineError):
    def __init__(self, path: str, line_number: int, reason: str = ""):
        super().__init__(f"corrupt event log {path} at line {line_number}: {reason}")
        self.path = path
        self.line_number = line_number


class BindError(EngineError):
    pass


class ConfigError(EngineError):
    pass
