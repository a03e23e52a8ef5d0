"""Exception hierarchy for the animation pipeline.

Every typed failure derives from ManimatorError so callers can catch the
whole family; the HTTP layer maps subclasses onto status codes.
"""

from __future__ import annotations

import enum


class ManimatorError(Exception):
    """Base class for all pipeline errors."""


class Stage(enum.Enum):
    """Pipeline stage a failure is attributed to."""

    PLANNING = "planning"
    CODING = "coding"
    RENDERING = "rendering"


class StageError(ManimatorError):
    """Wraps a lower-level failure with the stage it occurred in."""

    def __init__(self, stage: Stage, message: str):
        super().__init__(message)
        self.stage = stage


# --- ingest ---------------------------------------------------------------

class IngestError(ManimatorError):
    """Input normalization failures."""


class MalformedId(IngestError):
    """String does not match the arXiv identifier grammar."""


class NotAPdf(IngestError):
    """Body lacks the %PDF- magic header."""


class PdfTooLarge(IngestError):
    """PDF exceeds the configured byte limit."""


class EmptyPrompt(IngestError):
    """Prompt is empty after trimming."""


class PromptTooLong(IngestError):
    """Prompt exceeds the configured character limit."""


class NotFound(IngestError):
    """Remote endpoint returned 404 for the requested identifier."""


class FetchFailed(IngestError):
    """Network-level fetch failure; safe to retry."""

    retryable = True


class EncodeFailed(IngestError):
    """Compression/encoding backend error or digest mismatch on decode."""


# --- llm gateway ----------------------------------------------------------

class GatewayError(ManimatorError):
    """Chat-completion transport failures."""


class RouteUnsupported(GatewayError):
    """Request carries inline documents but the route cannot accept them."""


class ProviderError(GatewayError):
    """Provider returned an error; `retryable` follows the status class."""

    def __init__(self, message: str, status: int | None = None, retryable: bool = False):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


class GatewayTimeout(GatewayError):
    """Provider call timed out; retryable."""

    retryable = True


class ContextOverflow(GatewayError):
    """Estimated input exceeds the route's context hint (reject policy)."""


# --- scene planning -------------------------------------------------------

class SceneFormatError(ManimatorError):
    """Malformed scene description; signals a regeneration-worthy plan."""


class MissingSection(SceneFormatError):
    def __init__(self, name: str):
        super().__init__(f"missing section: {name}")
        self.name = name


class EmptyKeyPoints(SceneFormatError):
    def __init__(self) -> None:
        super().__init__("key points section has no items")


class UnbalancedLatex(SceneFormatError):
    def __init__(self, fragment: str):
        super().__init__(f"unbalanced LaTeX fragment: {fragment!r}")
        self.fragment = fragment


class ConfigMissingRoute(ManimatorError):
    """Service config lacks a model route required for this input kind."""


class ConfigInvalid(ManimatorError):
    """Service config file cannot be read or fails validation."""


# --- templates ------------------------------------------------------------

class TemplateError(ManimatorError):
    """Prompt template loading failures."""


class TemplateMissing(TemplateError):
    """A required template file is absent."""


class TemplateInvalid(TemplateError):
    """A template file exists but fails validation."""


# --- code generation ------------------------------------------------------

class NoScriptFound(ManimatorError):
    """Response contains no class with a Scene-suffixed base."""


class CodeGenExhausted(ManimatorError):
    """All code-generation attempts failed lint; carries the last report."""

    def __init__(self, message: str, report):
        super().__init__(message)
        self.report = report


# --- rendering ------------------------------------------------------------

class RenderError(ManimatorError):
    """Render-stage failures."""


class RuntimeUnavailable(RenderError):
    """Render runtime (interpreter/engine) not present."""


class RenderTimeout(RenderError):
    """Render exceeded its deadline and was killed."""


class RenderFailed(RenderError):
    """Engine exited non-zero; carries exit code and a log excerpt."""

    def __init__(self, message: str, exit_code: int, log_excerpt: str = ""):
        super().__init__(message)
        self.exit_code = exit_code
        self.log_excerpt = log_excerpt


class OutputMissing(RenderError):
    """Engine exited cleanly but produced no usable video file."""


# --- orchestrator ---------------------------------------------------------

class JobNotFound(ManimatorError):
    """No persisted job with the given identifier."""


class StorageUnavailable(ManimatorError):
    """Job store cannot be opened or written."""


class WrongState(ManimatorError):
    """Operation is not valid for the job's current state."""


class InvalidEditedPlan(ManimatorError):
    """Edited scene description failed validation; carries diagnostics."""

    def __init__(self, message: str, diagnostics: str = ""):
        super().__init__(message)
        self.diagnostics = diagnostics or message


# --- evaluation -----------------------------------------------------------

class OutOfRange(ManimatorError):
    """Rating outside the 1..5 scale or dimension outside [0, 1]."""


class EmptyRatingSet(ManimatorError):
    """Aggregation requested over zero ratings."""
