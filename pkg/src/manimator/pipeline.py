"""Job orchestration: the pipeline state machine, persistence, and
stage caching.

Each job walks Queued -> Planning -> (AwaitingReview | Coding) ->
Coding -> Rendering -> Done, or drops to Failed from any active state.
Done and Failed are absorbing. Every transition is validated against
the declared graph and appended to the job's history, so the persisted
record is a full audit trail.

Planning and coding results are cached by content digest; rendering is
never cached. LLM calls are the scarce resource, disk is not.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sqlite3
import threading
import time
import uuid
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .codegen import CodegenSettings, GeneratedScript, generate_code
from .errors import (
    JobNotFound,
    ManimatorError,
    Stage,
    StorageUnavailable,
    WrongState,
)
from .evaluation import HumanRating
from .gateway import ChatGateway
from .ingest import InputSource, canonical_input_bytes, input_source_from_dict, input_source_to_dict
from .planning import (
    PlannerSettings,
    SceneDescription,
    parse_scene_description,
    plan,
    select_route,
    serialize_scene_description,
)
from .rendering import (
    EngineConfig,
    RenderArtifact,
    RenderOptions,
    RenderPool,
    RenderQuality,
    compile_probe,
)
from .templates import TemplateSet

logger = logging.getLogger(__name__)


class SubmitMode(Enum):
    AUTO = "auto"
    REVIEW = "review"


# --- job states -------------------------------------------------------------

@dataclass(frozen=True)
class Queued:
    pass


@dataclass(frozen=True)
class Planning:
    pass


@dataclass(frozen=True)
class AwaitingReview:
    scene: SceneDescription


@dataclass(frozen=True)
class Coding:
    scene: SceneDescription


@dataclass(frozen=True)
class Rendering:
    script: GeneratedScript


@dataclass(frozen=True)
class Done:
    artifact: RenderArtifact


@dataclass(frozen=True)
class Failed:
    stage: Stage
    reason: str


JobState = Queued | Planning | AwaitingReview | Coding | Rendering | Done | Failed

_STATE_NAMES = {
    Queued: "queued",
    Planning: "planning",
    AwaitingReview: "awaiting_review",
    Coding: "coding",
    Rendering: "rendering",
    Done: "done",
    Failed: "failed",
}

TERMINAL_STATES = frozenset({"done", "failed"})

# States that execute work on the next advance() call.
RUNNABLE_STATES = frozenset({"queued", "planning", "coding", "rendering"})

TRANSITIONS: dict[str, frozenset[str]] = {
    "queued": frozenset({"planning", "failed"}),
    "planning": frozenset({"awaiting_review", "coding", "failed"}),
    "awaiting_review": frozenset({"coding", "failed"}),
    "coding": frozenset({"rendering", "failed"}),
    "rendering": frozenset({"done", "failed"}),
    "done": frozenset(),
    "failed": frozenset(),
}


def transition_graph(allow_render_retry: bool = False) -> dict[str, frozenset[str]]:
    """The declared graph, optionally extended with the bounded
    Rendering -> Coding repair edge."""
    if not allow_render_retry:
        return TRANSITIONS
    graph = dict(TRANSITIONS)
    graph["rendering"] = graph["rendering"] | {"coding"}
    return graph


def state_name(state: JobState) -> str:
    return _STATE_NAMES[type(state)]


def _state_to_dict(state: JobState) -> dict:
    data: dict = {"name": state_name(state)}
    if isinstance(state, (AwaitingReview, Coding)):
        data["scene"] = serialize_scene_description(state.scene)
    elif isinstance(state, Rendering):
        data["script"] = _script_to_dict(state.script)
    elif isinstance(state, Done):
        data["artifact"] = _artifact_to_dict(state.artifact)
    elif isinstance(state, Failed):
        data["stage"] = state.stage.value
        data["reason"] = state.reason
    return data


def _state_from_dict(data: dict) -> JobState:
    name = data["name"]
    if name == "queued":
        return Queued()
    if name == "planning":
        return Planning()
    if name == "awaiting_review":
        return AwaitingReview(parse_scene_description(data["scene"]))
    if name == "coding":
        return Coding(parse_scene_description(data["scene"]))
    if name == "rendering":
        return Rendering(_script_from_dict(data["script"]))
    if name == "done":
        return Done(_artifact_from_dict(data["artifact"]))
    if name == "failed":
        return Failed(Stage(data["stage"]), data["reason"])
    raise ValueError(f"unknown state name: {name!r}")


def _script_to_dict(script: GeneratedScript) -> dict:
    return {
        "source": script.source,
        "scene_class": script.scene_class,
        "attempt": script.attempt,
    }


def _script_from_dict(data: dict) -> GeneratedScript:
    return GeneratedScript(data["source"], data["scene_class"], data["attempt"])


def _artifact_to_dict(artifact: RenderArtifact) -> dict:
    return {
        "video_path": str(artifact.video_path),
        "format": artifact.format,
        "byte_length": artifact.byte_length,
        "render_log": artifact.render_log,
        "wall_time": artifact.wall_time,
    }


def _artifact_from_dict(data: dict) -> RenderArtifact:
    return RenderArtifact(
        video_path=Path(data["video_path"]),
        format=data["format"],
        byte_length=data["byte_length"],
        render_log=data["render_log"],
        wall_time=data["wall_time"],
    )


# --- the job record ---------------------------------------------------------

@dataclass(frozen=True)
class PipelineJob:
    """Persisted job record. History is append-only; config_snapshot is
    fixed at submission."""

    id: str
    input: InputSource
    mode: SubmitMode
    state: JobState
    created_at: float
    updated_at: float
    history: tuple[tuple[float, str, str], ...]
    config_snapshot: dict
    scene: SceneDescription | None = None
    render_retries: int = 0

    def with_state(
        self,
        new_state: JobState,
        detail: str = "",
        graph: dict[str, frozenset[str]] = TRANSITIONS,
    ) -> "PipelineJob":
        """Transition to new_state, enforcing the graph and appending
        history. Raises WrongState on an edge outside the graph."""
        source = state_name(self.state)
        target = state_name(new_state)
        if target not in graph.get(source, frozenset()):
            raise WrongState(f"illegal transition {source} -> {target}")
        now = max(time.time(), self.updated_at)  # clock may step backwards
        return replace(
            self,
            state=new_state,
            updated_at=now,
            history=self.history + ((now, target, detail),),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "input": input_source_to_dict(self.input),
            "mode": self.mode.value,
            "state": _state_to_dict(self.state),
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "history": [list(entry) for entry in self.history],
            "config_snapshot": self.config_snapshot,
            "scene": serialize_scene_description(self.scene) if self.scene else None,
            "render_retries": self.render_retries,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineJob":
        return cls(
            id=data["id"],
            input=input_source_from_dict(data["input"]),
            mode=SubmitMode(data["mode"]),
            state=_state_from_dict(data["state"]),
            created_at=data["created_at"],
            updated_at=data["updated_at"],
            history=tuple((e[0], e[1], e[2]) for e in data["history"]),
            config_snapshot=data["config_snapshot"],
            scene=parse_scene_description(data["scene"]) if data.get("scene") else None,
            render_retries=data.get("render_retries", 0),
        )

    @classmethod
    def create(
        cls, input_source: InputSource, mode: SubmitMode, config_snapshot: dict
    ) -> "PipelineJob":
        now = time.time()
        return cls(
            id=uuid.uuid4().hex,
            input=input_source,
            mode=mode,
            state=Queued(),
            created_at=now,
            updated_at=now,
            history=((now, "queued", "job submitted"),),
            config_snapshot=dict(config_snapshot),
        )


# --- persistence ------------------------------------------------------------

_SCHEMA = """
CREATE TABLE IF NOT EXISTS jobs (
    id TEXT PRIMARY KEY,
    created_at REAL NOT NULL,
    updated_at REAL NOT NULL,
    data TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS ratings (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    job_ref TEXT NOT NULL,
    dims TEXT NOT NULL,
    created_at REAL NOT NULL
);
"""


class JobStore:
    """Single-file sqlite store for jobs and human ratings.

    Connections are per-operation; sqlite's file locking serializes
    writers, which is plenty at desk scale."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with self._connect() as conn:
                conn.executescript(_SCHEMA)
        except sqlite3.Error as exc:
            raise StorageUnavailable(f"cannot open job store {self.path}: {exc}") from exc

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.path, timeout=30)

    def save(self, job: PipelineJob) -> None:
        payload = json.dumps(job.to_dict())
        try:
            with self._connect() as conn:
                conn.execute(
                    "INSERT INTO jobs (id, created_at, updated_at, data) "
                    "VALUES (?, ?, ?, ?) "
                    "ON CONFLICT(id) DO UPDATE SET updated_at=excluded.updated_at, "
                    "data=excluded.data",
                    (job.id, job.created_at, job.updated_at, payload),
                )
        except sqlite3.Error as exc:
            raise StorageUnavailable(f"cannot persist job {job.id}: {exc}") from exc

    def load(self, job_id: str) -> PipelineJob | None:
        try:
            with self._connect() as conn:
                row = conn.execute(
                    "SELECT data FROM jobs WHERE id = ?", (job_id,)
                ).fetchone()
        except sqlite3.Error as exc:
            raise StorageUnavailable(f"cannot read job {job_id}: {exc}") from exc
        if row is None:
            return None
        return PipelineJob.from_dict(json.loads(row[0]))

    def list_jobs(self) -> tuple[PipelineJob, ...]:
        try:
            with self._connect() as conn:
                rows = conn.execute(
                    "SELECT data FROM jobs ORDER BY created_at"
                ).fetchall()
        except sqlite3.Error as exc:
            raise StorageUnavailable(f"cannot list jobs: {exc}") from exc
        return tuple(PipelineJob.from_dict(json.loads(r[0])) for r in rows)

    def add_rating(self, rating: HumanRating) -> int:
        dims = json.dumps(list(rating.dims_raw))
        try:
            with self._connect() as conn:
                cursor = conn.execute(
                    "INSERT INTO ratings (job_ref, dims, created_at) VALUES (?, ?, ?)",
                    (rating.job_ref, dims, time.time()),
                )
                return int(cursor.lastrowid)
        except sqlite3.Error as exc:
            raise StorageUnavailable(f"cannot persist rating: {exc}") from exc

    def ratings(self) -> tuple[HumanRating, ...]:
        try:
            with self._connect() as conn:
                rows = conn.execute(
                    "SELECT job_ref, dims FROM ratings ORDER BY seq"
                ).fetchall()
        except sqlite3.Error as exc:
            raise StorageUnavailable(f"cannot list ratings: {exc}") from exc
        return tuple(
            HumanRating(job_ref, tuple(json.loads(dims))) for job_ref, dims in rows
        )


# --- stage cache ------------------------------------------------------------

@dataclass(frozen=True)
class CacheKey:
    """Content digest over everything that determines a stage's output."""

    digest: str

    @classmethod
    def build(
        cls,
        stage: str,
        payload: bytes,
        templates_digest: str,
        route_ids: tuple[str, ...],
    ) -> "CacheKey":
        hasher = hashlib.sha256()
        hasher.update(
            json.dumps(
                {
                    "stage": stage,
                    "payload": hashlib.sha256(payload).hexdigest(),
                    "templates": templates_digest,
                    "routes": list(route_ids),
                },
                sort_keys=True,
                separators=(",", ":"),
            ).encode("utf-8")
        )
        return cls(hasher.hexdigest())


class StageCache:
    """Digest-keyed string cache as one file per entry. Writes are
    atomic (write-to-temp, rename)."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: CacheKey) -> Path:
        return self.directory / f"{key.digest}.json"

    def get(self, key: CacheKey) -> str | None:
        path = self._path(key)
        try:
            return json.loads(path.read_text(encoding="utf-8"))["value"]
        except FileNotFoundError:
            return None
        except (json.JSONDecodeError, KeyError, OSError):
            logger.warning("discarding unreadable cache entry %s", path)
            return None

    def put(self, key: CacheKey, value: str) -> None:
        path = self._path(key)
        temp = path.with_suffix(".tmp")
        temp.write_text(json.dumps({"value": value}), encoding="utf-8")
        temp.replace(path)

    def invalidate(self, key: CacheKey) -> None:
        self._path(key).unlink(missing_ok=True)


# --- orchestrator -----------------------------------------------------------

@dataclass(frozen=True)
class OrchestratorPolicy:
    quality: RenderQuality = RenderQuality.LOW
    render_timeout_seconds: float = 600.0
    cache_enabled: bool = True
    allow_render_retry_to_coding: bool = False


class Orchestrator:
    """Drives jobs through the pipeline. Multiple jobs may advance
    concurrently; a single job is serialized by its own lock."""

    def __init__(
        self,
        store: JobStore,
        gateway: ChatGateway,
        templates: TemplateSet,
        planner: PlannerSettings,
        codegen: CodegenSettings,
        engine: EngineConfig,
        artifacts_root: Path,
        cache: StageCache | None = None,
        pool: RenderPool | None = None,
        policy: OrchestratorPolicy = OrchestratorPolicy(),
    ):
        self.store = store
        self.gateway = gateway
        self.templates = templates
        self.planner = planner
        self.codegen = codegen
        self.engine = engine
        self.artifacts_root = Path(artifacts_root)
        self.cache = cache
        self.pool = pool or RenderPool()
        self.policy = policy
        self._graph = transition_graph(policy.allow_render_retry_to_coding)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _job_lock(self, job_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(job_id, threading.Lock())

    def _load(self, job_id: str) -> PipelineJob:
        job = self.store.load(job_id)
        if job is None:
            raise JobNotFound(f"no such job: {job_id}")
        return job

    def _persist(self, job: PipelineJob) -> PipelineJob:
        self.store.save(job)
        return job

    # -- public operations ---------------------------------------------------

    def submit(self, input_source: InputSource, mode: SubmitMode = SubmitMode.AUTO) -> str:
        snapshot = {
            "mode": mode.value,
            "plan_templates": self.templates.plan_digest,
            "code_templates": self.templates.code_digest,
            "text_route": self.planner.text_route.route_id if self.planner.text_route else None,
            "document_route": (
                self.planner.document_route.route_id if self.planner.document_route else None
            ),
            "code_route": self.codegen.route.route_id if self.codegen.route else None,
            "max_code_attempts": self.codegen.max_code_attempts,
            "quality": self.policy.quality.value,
        }
        job = PipelineJob.create(input_source, mode, snapshot)
        self._persist(job)
        logger.info("job %s submitted (%s)", job.id, mode.value)
        return job.id

    def get_job(self, job_id: str) -> PipelineJob:
        return self._load(job_id)

    def advance(self, job_id: str) -> PipelineJob:
        """Execute exactly one pipeline stage for this job."""
        with self._job_lock(job_id):
            job = self._load(job_id)
            name = state_name(job.state)
            if name in TERMINAL_STATES:
                raise WrongState(f"job {job_id} is already {name}")
            if name == "awaiting_review":
                raise WrongState("job is awaiting plan review; approve it first")
            if name in ("queued", "planning"):
                return self._advance_planning(job)
            if name == "coding":
                return self._advance_coding(job)
            if name == "rendering":
                return self._advance_rendering(job)
            raise WrongState(f"cannot advance from state {name}")  # unreachable

    def approve_scene(self, job_id: str, edited: SceneDescription | None = None) -> PipelineJob:
        """Move an AwaitingReview job to Coding, optionally with an
        edited plan (already validated by construction)."""
        with self._job_lock(job_id):
            job = self._load(job_id)
            if not isinstance(job.state, AwaitingReview):
                raise WrongState(
                    f"job is {state_name(job.state)}, not awaiting review"
                )
            scene = edited if edited is not None else job.state.scene
            detail = "plan edited and approved" if edited is not None else "plan approved"
            job = replace(job, scene=scene)
            return self._persist(job.with_state(Coding(scene), detail, self._graph))

    def run_to_completion(self, job_id: str) -> PipelineJob:
        """Advance until Done/Failed, or until AwaitingReview pauses a
        review-mode job."""
        while True:
            job = self._load(job_id)
            name = state_name(job.state)
            if name in TERMINAL_STATES or name == "awaiting_review":
                return job
            job = self.advance(job_id)

    # -- stage execution -----------------------------------------------------

    def _advance_planning(self, job: PipelineJob) -> PipelineJob:
        if isinstance(job.state, Queued):
            job = self._persist(job.with_state(Planning(), "planning started", self._graph))
        try:
            scene = self._plan_stage(job)
        except ManimatorError as exc:
            return self._fail(job, Stage.PLANNING, exc)
        job = replace(job, scene=scene)
        if job.mode is SubmitMode.REVIEW:
            return self._persist(
                job.with_state(AwaitingReview(scene), "plan ready for review", self._graph)
            )
        return self._persist(job.with_state(Coding(scene), "plan ready", self._graph))

    def _advance_coding(self, job: PipelineJob) -> PipelineJob:
        assert isinstance(job.state, Coding)
        try:
            script = self._code_stage(job.state.scene, bypass_cache=job.render_retries > 0)
        except ManimatorError as exc:
            return self._fail(job, Stage.CODING, exc)
        detail = f"script ready: class {script.scene_class}, attempt {script.attempt}"
        return self._persist(job.with_state(Rendering(script), detail, self._graph))

    def _advance_rendering(self, job: PipelineJob) -> PipelineJob:
        assert isinstance(job.state, Rendering)
        script = job.state.script
        workdir = self.artifacts_root / job.id / f"render-{job.render_retries}"
        opts = RenderOptions(
            workdir=workdir,
            quality=self.policy.quality,
            timeout_seconds=self.policy.render_timeout_seconds,
        )
        try:
            artifact = self.pool.render(script, opts, self.engine)
        except ManimatorError as exc:
            repaired = self._maybe_retry_coding(job, script, exc)
            if repaired is not None:
                return repaired
            return self._fail(job, Stage.RENDERING, exc)
        return self._persist(job.with_state(Done(artifact), "video ready", self._graph))

    def _maybe_retry_coding(
        self, job: PipelineJob, script: GeneratedScript, exc: ManimatorError
    ) -> PipelineJob | None:
        """The bounded Rendering -> Coding repair edge: only when
        enabled, only once per job, and only for a script the compile
        probe also rejects."""
        if not self.policy.allow_render_retry_to_coding or job.render_retries >= 1:
            return None
        if job.scene is None:
            return None
        probe_dir = self.artifacts_root / job.id / "probe"
        try:
            probe = compile_probe(script, probe_dir, self.engine)
        except ManimatorError:
            return None
        if probe.ok:
            return None
        self._invalidate_code_cache(job.scene)
        detail = f"render failed ({exc}); compile probe: {probe.diagnostics[:200]}"
        job = replace(job, render_retries=job.render_retries + 1)
        logger.info("job %s looping back to coding after render failure", job.id)
        return self._persist(job.with_state(Coding(job.scene), detail, self._graph))

    def _fail(self, job: PipelineJob, stage: Stage, exc: ManimatorError) -> PipelineJob:
        logger.warning("job %s failed in %s: %s", job.id, stage.value, exc)
        reason = str(exc)
        excerpt = getattr(exc, "log_excerpt", "")
        if excerpt:
            # keep the engine log tail with the job so it can be served later
            reason = f"{reason}\n{excerpt}"
        return self._persist(
            job.with_state(Failed(stage, reason), str(exc), self._graph)
        )

    def _plan_cache_key(self, input_source: InputSource) -> CacheKey:
        route = select_route(input_source, self.planner)
        return CacheKey.build(
            "planning",
            canonical_input_bytes(input_source),
            self.templates.plan_digest,
            (route.route_id,),
        )

    def _plan_stage(self, job: PipelineJob) -> SceneDescription:
        key = self._plan_cache_key(job.input) if self.cache_on else None
        if key is not None and (hit := self.cache.get(key)) is not None:
            logger.info("job %s: plan served from cache", job.id)
            return parse_scene_description(hit)
        scene = plan(job.input, self.gateway, self.planner, self.templates)
        if key is not None:
            self.cache.put(key, serialize_scene_description(scene))
        return scene

    def _code_cache_key(self, scene: SceneDescription) -> CacheKey:
        # Keyed on the scene actually being coded, not the original
        # input: review-mode edits must never be served a stale script.
        route_id = self.codegen.route.route_id if self.codegen.route else "default"
        return CacheKey.build(
            "coding",
            serialize_scene_description(scene).encode("utf-8"),
            self.templates.code_digest,
            (route_id,),
        )

    def _invalidate_code_cache(self, scene: SceneDescription) -> None:
        if self.cache_on:
            self.cache.invalidate(self._code_cache_key(scene))

    def _code_stage(
        self, scene: SceneDescription, bypass_cache: bool = False
    ) -> GeneratedScript:
        key = self._code_cache_key(scene) if self.cache_on else None
        if key is not None and not bypass_cache:
            hit = self.cache.get(key)
            if hit is not None:
                return _script_from_dict(json.loads(hit))
        script = generate_code(scene, self.gateway, self.codegen, self.templates)
        if key is not None:
            self.cache.put(key, json.dumps(_script_to_dict(script)))
        return script

    @property
    def cache_on(self) -> bool:
        return self.cache is not None and self.policy.cache_enabled
