"""Exception hierarchy shared across the package."""

from __future__ import annotations


class T2SError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(T2SError):
    """Required configuration (flags, environment) is missing or inconsistent."""


class SchemaError(T2SError):
    """A schema document or schema lookup violated the catalog contract."""


class CorpusError(T2SError):
    """A dataset record or corpus operation violated the corpus contract."""


class PromptError(T2SError):
    """A prompt spec is internally inconsistent."""


class PromptBudgetError(PromptError):
    """The rendered prompt exceeds the input token budget.

    Attributes:
        overflow: number of estimated tokens beyond the budget.
    """

    def __init__(self, message: str, overflow: int):
        super().__init__(message)
        self.overflow = overflow


class BackendError(T2SError):
    """Base class for generation backend failures."""


class BackendTransportError(BackendError):
    """The backend could not be reached (connection, DNS, timeout).

    Attributes:
        retryable: transport failures are assumed transient.
    """

    retryable = True


class BackendProtocolError(BackendError):
    """The backend answered, but with an error payload or a malformed body."""

    retryable = False


class ScriptExhaustedError(BackendError):
    """A scripted backend received more requests than its script holds."""

    retryable = False


class ExtractionError(T2SError):
    """No SQL statement could be recovered from a raw model output.

    Attributes:
        raw_text: the offending raw output, kept for diagnostics.
    """

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text


class SqlSyntaxError(T2SError):
    """The SQL text does not parse under the supported grammar subset.

    Attributes:
        position: character offset of the first offending token.
    """

    def __init__(self, message: str, position: int = 0):
        super().__init__(message)
        self.position = position


class EvaluationError(T2SError):
    """Run records and gold items cannot be aligned or scored."""
