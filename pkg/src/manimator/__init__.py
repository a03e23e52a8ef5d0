"""Turn a prompt, PDF, or arXiv ID into an explanatory Manim animation.

The pipeline runs two LLM stages (scene planning, then scene-script
generation) and a supervised render stage, exposed through a REST API
plus a CLI. This package root re-exports the core domain surface; the
HTTP layer lives in `manimator.service` and the CLI in `manimator.cli`.
"""

from .codegen import (
    CodegenSettings,
    GeneratedScript,
    LintPolicy,
    LintReport,
    extract_script,
    generate_code,
    lint_script,
)
from .config import ServiceConfig, default_config, load_config
from .errors import ManimatorError, Stage
from .evaluation import (
    DimensionScores,
    EvaluationScore,
    HumanRating,
    aggregate_ratings,
    comparison_report,
    normalize_rating,
    overall_score,
)
from .gateway import (
    ChatGateway,
    ChatMessage,
    ChatRequest,
    ChatResponse,
    HttpChatGateway,
    MockChatGateway,
    ModelRoute,
    RetryPolicy,
    complete_with_retry,
)
from .ingest import (
    ArxivInput,
    EncodedPdf,
    InputSource,
    PdfDocument,
    PdfInput,
    PromptInput,
    decode_pdf,
    encode_pdf,
    fetch_arxiv_pdf,
    validate_arxiv_id,
)
from .pipeline import (
    JobStore,
    Orchestrator,
    OrchestratorPolicy,
    PipelineJob,
    StageCache,
    SubmitMode,
)
from .planning import (
    KeyPoint,
    PlannerSettings,
    SceneDescription,
    parse_scene_description,
    plan,
    serialize_scene_description,
)
from .rendering import (
    EngineConfig,
    RenderArtifact,
    RenderOptions,
    RenderPool,
    RenderQuality,
    probe_environment,
    render,
)
from .templates import TemplateSet

__version__ = "0.1.0"

__all__ = [
    "ArxivInput",
    "ChatGateway",
    "ChatMessage",
    "ChatRequest",
    "ChatResponse",
    "CodegenSettings",
    "DimensionScores",
    "EncodedPdf",
    "EngineConfig",
    "EvaluationScore",
    "GeneratedScript",
    "HttpChatGateway",
    "HumanRating",
    "InputSource",
    "JobStore",
    "KeyPoint",
    "LintPolicy",
    "LintReport",
    "ManimatorError",
    "MockChatGateway",
    "ModelRoute",
    "Orchestrator",
    "OrchestratorPolicy",
    "PdfDocument",
    "PdfInput",
    "PipelineJob",
    "PlannerSettings",
    "PromptInput",
    "RenderArtifact",
    "RenderOptions",
    "RenderPool",
    "RenderQuality",
    "RetryPolicy",
    "SceneDescription",
    "ServiceConfig",
    "Stage",
    "StageCache",
    "SubmitMode",
    "TemplateSet",
    "aggregate_ratings",
    "comparison_report",
    "complete_with_retry",
    "decode_pdf",
    "default_config",
    "encode_pdf",
    "extract_script",
    "fetch_arxiv_pdf",
    "generate_code",
    "lint_script",
    "load_config",
    "normalize_rating",
    "overall_score",
    "parse_scene_description",
    "plan",
    "probe_environment",
    "render",
    "serialize_scene_description",
    "validate_arxiv_id",
    "__version__",
]
