"""Stage 3: supervised rendering.

Runs a lint-passed script through the engine CLI inside an isolated,
initially-empty working directory. The child gets its own process
group so a timeout kills the whole tree, not just the direct child.
The engine invocation is configuration (binary, flags, output glob):
production uses the real engine, tests substitute a stub.
"""

from __future__ import annotations

import logging
import os
import shlex
import signal
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .codegen import GeneratedScript
from .errors import OutputMissing, RenderFailed, RenderTimeout, RuntimeUnavailable

logger = logging.getLogger(__name__)

ENGINE_ARGV_ENV = "MANIMATOR_ENGINE_ARGV"
SCRIPT_FILENAME = "scene.py"
MP4_MAGIC_OFFSET = 4
MP4_MAGIC = b"ftyp"
LOG_EXCERPT_CHARS = 2000


class RenderQuality(Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


QUALITY_FLAGS = {
    RenderQuality.LOW: "-ql",
    RenderQuality.MEDIUM: "-qm",
    RenderQuality.HIGH: "-qh",
}


def default_pool_size() -> int:
    return max(1, (os.cpu_count() or 2) // 2)


@dataclass(frozen=True)
class EngineConfig:
    """How to invoke the engine. Tokens {script}, {scene}, {quality}
    are substituted per render."""

    engine_argv: tuple[str, ...] = ("manim", "{quality}", "{script}", "{scene}")
    compile_argv: tuple[str, ...] = (sys.executable, "-m", "py_compile", "{script}")
    encoder_argv: tuple[str, ...] = ("ffmpeg", "-version")
    output_glob: str = "**/*.mp4"

    @classmethod
    def from_env(cls) -> "EngineConfig":
        """Default config, with the engine argv overridable from the
        environment (how tests point at a stub engine)."""
        override = os.environ.get(ENGINE_ARGV_ENV)
        if override:
            return cls(engine_argv=tuple(shlex.split(override)))
        return cls()

    def render_argv(self, script: Path, scene_class: str, quality: RenderQuality) -> list[str]:
        substitutions = {
            "{script}": str(script),
            "{scene}": scene_class,
            "{quality}": QUALITY_FLAGS[quality],
        }
        argv = []
        for token in self.engine_argv:
            for placeholder, value in substitutions.items():
                token = token.replace(placeholder, value)
            argv.append(token)
        return argv


@dataclass(frozen=True)
class RenderOptions:
    workdir: Path
    quality: RenderQuality = RenderQuality.LOW
    timeout_seconds: float = 600.0

    def __post_init__(self):
        if self.timeout_seconds <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class RenderArtifact:
    video_path: Path
    format: str
    byte_length: int
    render_log: str
    wall_time: float


@dataclass(frozen=True)
class EnvironmentReport:
    engine_present: bool
    encoder_present: bool
    versions: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ProbeResult:
    ok: bool
    diagnostics: str = ""


def _capture_version(argv: tuple[str, ...]) -> str | None:
    try:
        proc = subprocess.run(
            list(argv), capture_output=True, text=True, timeout=30
        )
    except (FileNotFoundError, PermissionError, subprocess.TimeoutExpired):
        return None
    if proc.returncode != 0:
        return None
    return (proc.stdout or proc.stderr).strip()


def probe_environment(config: EngineConfig = EngineConfig()) -> EnvironmentReport:
    """Report engine/encoder availability; absence is not an error."""
    versions = {}
    engine_version = _capture_version((config.engine_argv[0], "--version"))
    if engine_version is not None:
        versions["engine"] = engine_version
    encoder_version = _capture_version(config.encoder_argv)
    if encoder_version is not None:
        versions["encoder"] = encoder_version
    return EnvironmentReport(
        engine_present=engine_version is not None,
        encoder_present=encoder_version is not None,
        versions=versions,
    )


def _substitute(argv: tuple[str, ...], script: Path) -> list[str]:
    return [token.replace("{script}", str(script)) for token in argv]


def compile_probe(
    script: GeneratedScript, workdir: Path, config: EngineConfig = EngineConfig()
) -> ProbeResult:
    """Syntax-check the script without rendering it."""
    workdir.mkdir(parents=True, exist_ok=True)
    script_path = workdir / SCRIPT_FILENAME
    script_path.write_text(script.source, encoding="utf-8")
    try:
        proc = subprocess.run(
            _substitute(config.compile_argv, script_path),
            capture_output=True, text=True, cwd=workdir, timeout=60,
        )
    except FileNotFoundError as exc:
        raise RuntimeUnavailable(f"syntax checker not runnable: {exc}") from exc
    if proc.returncode == 0:
        return ProbeResult(ok=True)
    return ProbeResult(ok=False, diagnostics=(proc.stderr or proc.stdout).strip())


def _combined_log(stdout: str, stderr: str) -> str:
    return f"[stdout]\n{stdout}\n[stderr]\n{stderr}"


def _newest_video(workdir: Path, pattern: str) -> Path | None:
    candidates = [p for p in workdir.glob(pattern) if p.is_file()]
    if not candidates:
        return None
    return max(candidates, key=lambda p: (p.stat().st_mtime_ns, str(p)))


def _kill_tree(proc: subprocess.Popen) -> None:
    # the child is its own session leader, so the group id is its pid
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except ProcessLookupError:
        pass
    try:
        proc.wait(timeout=10)
    except subprocess.TimeoutExpired:  # pragma: no cover - kernel refusing SIGKILL
        logger.error("render process %d survived SIGKILL", proc.pid)


def render(
    script: GeneratedScript,
    opts: RenderOptions,
    config: EngineConfig = EngineConfig(),
) -> RenderArtifact:
    """Execute the script in its own empty workdir and collect the video.

    Raises RenderTimeout (tree killed), RenderFailed (nonzero exit, log
    excerpt attached), or OutputMissing (exit 0 but no valid MP4).
    """
    workdir = opts.workdir
    workdir.mkdir(parents=True, exist_ok=True)
    if any(workdir.iterdir()):
        raise ValueError(f"workdir is not empty: {workdir}")
    script_path = workdir / SCRIPT_FILENAME
    script_path.write_text(script.source, encoding="utf-8")
    argv = config.render_argv(script_path, script.scene_class, opts.quality)
    logger.info("render start: %s (timeout %.0fs)", argv, opts.timeout_seconds)
    started = time.monotonic()
    try:
        proc = subprocess.Popen(
            argv,
            cwd=workdir,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            start_new_session=True,
        )
    except FileNotFoundError as exc:
        raise RuntimeUnavailable(f"engine not runnable: {argv[0]}") from exc
    try:
        stdout, stderr = proc.communicate(timeout=opts.timeout_seconds)
    except subprocess.TimeoutExpired:
        _kill_tree(proc)
        raise RenderTimeout(
            f"render exceeded {opts.timeout_seconds:.0f}s and was killed"
        )
    wall_time = time.monotonic() - started
    log = _combined_log(stdout, stderr)
    if proc.returncode != 0:
        raise RenderFailed(
            f"engine exited with status {proc.returncode}",
            exit_code=proc.returncode,
            log_excerpt=log[-LOG_EXCERPT_CHARS:],
        )
    video = _newest_video(workdir, config.output_glob)
    if video is None:
        raise OutputMissing("engine exited 0 but produced no video file")
    data_head = video.read_bytes()[:12]
    if len(data_head) < 12 or data_head[MP4_MAGIC_OFFSET : MP4_MAGIC_OFFSET + 4] != MP4_MAGIC:
        raise OutputMissing(f"produced file is not an MP4 container: {video.name}")
    byte_length = video.stat().st_size
    logger.info("render done: %s (%d bytes, %.2fs)", video, byte_length, wall_time)
    return RenderArtifact(
        video_path=video,
        format="mp4",
        byte_length=byte_length,
        render_log=log,
        wall_time=wall_time,
    )


class RenderPool:
    """Caps concurrent renders; every other stage overlaps freely."""

    def __init__(self, max_workers: int | None = None):
        self.max_workers = default_pool_size() if max_workers is None else max_workers
        if self.max_workers < 1:
            raise ValueError("pool needs at least one worker")
        self._slots = threading.BoundedSemaphore(self.max_workers)

    def render(
        self,
        script: GeneratedScript,
        opts: RenderOptions,
        config: EngineConfig = EngineConfig(),
    ) -> RenderArtifact:
        with self._slots:
            return render(script, opts, config)
