"""REST facade over the orchestrator.

Every error leaves as the same JSON envelope {code, message, detail}.
Jobs advance in background tasks after submission; clients poll
GET /jobs/{id} (suggested interval: 1 s) and fetch sub-resources once
the state allows them.
"""

from __future__ import annotations

import dataclasses
import logging
from http import HTTPStatus
from pathlib import Path

import httpx
from fastapi import BackgroundTasks, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from starlette.datastructures import UploadFile
from starlette.exceptions import HTTPException as StarletteHTTPException

from .config import ServiceConfig, load_config
from .errors import (
    EmptyPrompt,
    EncodeFailed,
    FetchFailed,
    InvalidEditedPlan,
    JobNotFound,
    MalformedId,
    ManimatorError,
    NotAPdf,
    NotFound,
    OutOfRange,
    PdfTooLarge,
    PromptTooLong,
    SceneFormatError,
    Stage,
    StorageUnavailable,
    WrongState,
)
from .evaluation import EvaluationScore, HumanRating, aggregate_ratings
from .gateway import HttpChatGateway
from .ingest import (
    ArxivInput,
    PdfDocument,
    PdfInput,
    PdfSource,
    PromptInput,
    encode_pdf,
    fetch_arxiv_pdf,
    input_source_to_dict,
    make_arxiv_client,
    validate_arxiv_id,
)
from .pipeline import (
    Done,
    Failed,
    JobStore,
    Orchestrator,
    PipelineJob,
    StageCache,
    SubmitMode,
    state_name,
)
from .rendering import RenderPool
from .planning import parse_scene_description, serialize_scene_description
from .templates import TemplateSet

logger = logging.getLogger(__name__)

API_TOKEN_HEADER = "x-api-token"

_STATUS_BY_ERROR: tuple[tuple[type, int], ...] = (
    (MalformedId, 400),
    (EmptyPrompt, 400),
    (NotAPdf, 400),
    (PdfTooLarge, 413),
    (PromptTooLong, 413),
    (JobNotFound, 404),
    (NotFound, 404),
    (FetchFailed, 502),
    (EncodeFailed, 500),
    (WrongState, 409),
    (InvalidEditedPlan, 422),
    (OutOfRange, 422),
    (StorageUnavailable, 503),
)


def _status_for(exc: ManimatorError) -> int:
    for cls, status in _STATUS_BY_ERROR:
        if isinstance(exc, cls):
            return status
    return 500


def _envelope(status: int, code: str, message: str, detail: str = "") -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail},
    )


def _input_label(job: PipelineJob) -> str:
    data = input_source_to_dict(job.input)
    if data["kind"] == "prompt":
        text = data["text"]
        return text if len(text) <= 80 else text[:77] + "..."
    if data["kind"] == "arxiv":
        return f"arXiv:{data['arxiv_id']}"
    return "uploaded PDF"


def job_summary(job: PipelineJob) -> dict:
    """Client-facing view: full history, no config internals."""
    base = f"/jobs/{job.id}"
    failure = None
    if isinstance(job.state, Failed):
        failure = {"stage": job.state.stage.value, "reason": job.state.reason}
    return {
        "id": job.id,
        "state": state_name(job.state),
        "mode": job.mode.value,
        "input_kind": input_source_to_dict(job.input)["kind"],
        "input_label": _input_label(job),
        "created_at": job.created_at,
        "updated_at": job.updated_at,
        "history": [
            {"at": at, "state": state, "detail": detail}
            for at, state, detail in job.history
        ],
        "failure": failure,
        "links": {
            "self": base,
            "scene": f"{base}/scene",
            "video": f"{base}/video",
            "log": f"{base}/log",
        },
    }


def _score_payload(score: EvaluationScore) -> dict:
    return {
        "dims": dataclasses.asdict(score.dims),
        "overall": score.overall,
    }


def build_orchestrator(config: ServiceConfig, gateway=None) -> Orchestrator:
    """Composition root: file store, stage cache, and render pool all
    rooted under the configured data directory."""
    if gateway is None:
        gateway = HttpChatGateway(
            config.providers, overflow_policy=config.overflow_policy
        )
    return Orchestrator(
        store=JobStore(config.store_path),
        gateway=gateway,
        templates=TemplateSet.load(config.templates_dir),
        planner=config.planner,
        codegen=config.codegen,
        engine=config.engine,
        artifacts_root=config.artifacts_root,
        cache=StageCache(config.cache_dir),
        pool=RenderPool(config.max_render_workers),
        policy=config.policy,
    )


def create_app(
    config: ServiceConfig | None = None,
    orchestrator: Orchestrator | None = None,
    arxiv_client: httpx.Client | None = None,
) -> FastAPI:
    config = config or load_config()
    orchestrator = orchestrator or build_orchestrator(config)
    arxiv_client = arxiv_client or make_arxiv_client()

    app = FastAPI(title="manimator")
    app.state.orchestrator = orchestrator
    app.state.config = config

    @app.exception_handler(ManimatorError)
    async def manimator_error_handler(request: Request, exc: ManimatorError):
        detail = getattr(exc, "diagnostics", "") or getattr(exc, "log_excerpt", "")
        return _envelope(_status_for(exc), type(exc).__name__, str(exc), detail)

    @app.exception_handler(StarletteHTTPException)
    async def http_error_handler(request: Request, exc: StarletteHTTPException):
        code = HTTPStatus(exc.status_code).phrase.replace(" ", "")
        return _envelope(exc.status_code, code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return _envelope(422, "ValidationError", "request validation failed", str(exc.errors()))

    @app.middleware("http")
    async def require_token(request: Request, call_next):
        token = config.api_token
        exempt = request.url.path.startswith("/ui")
        if token and not exempt and request.headers.get(API_TOKEN_HEADER) != token:
            return _envelope(401, "Unauthorized", "missing or wrong API token")
        return await call_next(request)

    def _drive(job_id: str) -> None:
        # background worker: stage failures are captured in job state,
        # anything else is logged and leaves the job for a later poke
        try:
            orchestrator.run_to_completion(job_id)
        except ManimatorError:
            logger.exception("background advance of job %s aborted", job_id)

    async def _parse_submission(request: Request) -> PromptInput | PdfInput | ArxivInput:
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = form.get("pdf")
            if not isinstance(upload, UploadFile):
                raise NotAPdf("multipart submissions need a file field named 'pdf'")
            data = await upload.read()
            doc = PdfDocument(data, PdfSource.UPLOAD)
            return PdfInput(encode_pdf(doc, compress=False))
        try:
            body = await request.json()
        except Exception:
            body = None
        if not isinstance(body, dict):
            raise EmptyPrompt("body must be a JSON object or a multipart PDF upload")
        prompt = body.get("prompt")
        arxiv_id = body.get("arxiv_id")
        if (prompt is None) == (arxiv_id is None):
            raise EmptyPrompt("provide exactly one of 'prompt' or 'arxiv_id'")
        if prompt is not None:
            return PromptInput(str(prompt))
        validated = validate_arxiv_id(str(arxiv_id))
        doc = fetch_arxiv_pdf(validated, arxiv_client)
        return ArxivInput(validated, encode_pdf(doc, compress=False))

    @app.post("/jobs", status_code=202)
    async def submit_job(
        request: Request, background: BackgroundTasks, mode: str = "auto"
    ):
        try:
            submit_mode = SubmitMode(mode)
        except ValueError:
            return _envelope(400, "InvalidMode", f"unknown mode {mode!r}, use auto or review")
        source = await _parse_submission(request)
        job_id = orchestrator.submit(source, submit_mode)
        background.add_task(_drive, job_id)
        return JSONResponse(
            status_code=202,
            content=job_summary(orchestrator.get_job(job_id)),
            headers={"Location": f"/jobs/{job_id}"},
        )

    @app.get("/jobs")
    async def list_jobs(state: str | None = None):
        jobs = orchestrator.store.list_jobs()
        if state is not None:
            jobs = tuple(j for j in jobs if state_name(j.state) == state)
        return {"jobs": [job_summary(j) for j in jobs]}

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str):
        return job_summary(orchestrator.get_job(job_id))

    @app.get("/jobs/{job_id}/scene")
    async def get_scene(job_id: str):
        job = orchestrator.get_job(job_id)
        if job.scene is None:
            raise WrongState(f"job is {state_name(job.state)}; no scene description yet")
        return PlainTextResponse(
            serialize_scene_description(job.scene), media_type="text/markdown"
        )

    @app.post("/jobs/{job_id}/scene")
    async def approve_scene(
        job_id: str, request: Request, background: BackgroundTasks
    ):
        raw = (await request.body()).decode("utf-8")
        job = orchestrator.get_job(job_id)
        edited = None
        if raw.strip():
            try:
                edited = parse_scene_description(raw)
            except SceneFormatError as exc:
                raise InvalidEditedPlan(
                    "edited plan failed validation", diagnostics=str(exc)
                ) from exc
            if getattr(job.state, "scene", None) == edited:
                edited = None  # unchanged text is a plain approval
        job = orchestrator.approve_scene(job_id, edited)
        background.add_task(_drive, job_id)
        return job_summary(job)

    @app.get("/jobs/{job_id}/video")
    async def get_video(job_id: str):
        job = orchestrator.get_job(job_id)
        if not isinstance(job.state, Done):
            raise WrongState(f"job is {state_name(job.state)}; no video yet")
        path = Path(job.state.artifact.video_path)
        if not path.is_file():
            raise StorageUnavailable(f"rendered video missing from disk: {path.name}")
        return FileResponse(path, media_type="video/mp4")

    @app.get("/jobs/{job_id}/log")
    async def get_log(job_id: str):
        job = orchestrator.get_job(job_id)
        if isinstance(job.state, Done):
            return PlainTextResponse(job.state.artifact.render_log)
        if isinstance(job.state, Failed) and job.state.stage is Stage.RENDERING:
            return PlainTextResponse(job.state.reason)
        raise WrongState(f"job is {state_name(job.state)}; no render log")

    @app.post("/ratings", status_code=201)
    async def post_rating(request: Request):
        try:
            body = await request.json()
        except Exception:
            body = None
        if not isinstance(body, dict):
            raise OutOfRange("body must be a JSON object with job_id and dims")
        job_id = body.get("job_id")
        dims = body.get("dims")
        if not isinstance(job_id, str) or not job_id:
            raise OutOfRange("job_id must be a non-empty string")
        orchestrator.get_job(job_id)  # 404 for ratings against unknown jobs
        if not isinstance(dims, list) or not all(
            isinstance(d, int) and not isinstance(d, bool) for d in dims
        ):
            raise OutOfRange("dims must be a list of five integers")
        rating = HumanRating(job_id, tuple(dims))
        seq = orchestrator.store.add_rating(rating)
        return JSONResponse(
            status_code=201,
            content={"id": seq, "job_id": job_id, "dims": list(dims)},
        )

    @app.get("/ratings/summary")
    async def ratings_summary():
        ratings = list(orchestrator.store.ratings())
        if not ratings:
            return {"count": 0, "score": None}
        return {
            "count": len(ratings),
            "score": _score_payload(aggregate_ratings(ratings)),
        }

    if config.static_dir is not None and Path(config.static_dir).is_dir():
        app.mount(
            "/ui",
            StaticFiles(directory=config.static_dir, html=True),
            name="ui",
        )

    return app
