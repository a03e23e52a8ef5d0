"""Service configuration: one YAML file, environment overrides on top,
typed settings out.

Precedence is environment > file > built-in defaults. Section parsers
reject unknown keys so a typo fails loudly at startup instead of
silently running with a default.
"""

from __future__ import annotations

import os
import shlex
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .codegen import CodegenSettings, LintPolicy
from .errors import ConfigInvalid
from .gateway import ModelRoute, ProviderAdapter, RetryPolicy
from .pipeline import OrchestratorPolicy
from .planning import PlannerSettings
from .rendering import ENGINE_ARGV_ENV, EngineConfig, RenderQuality

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8621

CONFIG_PATH_ENV = "MANIMATOR_CONFIG"
DATA_DIR_ENV = "MANIMATOR_DATA_DIR"
HOST_ENV = "MANIMATOR_HOST"
PORT_ENV = "MANIMATOR_PORT"
API_TOKEN_ENV = "MANIMATOR_API_TOKEN"
STATIC_DIR_ENV = "MANIMATOR_STATIC_DIR"
TEMPLATES_DIR_ENV = "MANIMATOR_TEMPLATES_DIR"


@dataclass(frozen=True)
class ServiceConfig:
    """Everything the service process needs, fully resolved."""

    data_dir: Path
    store_path: Path
    cache_dir: Path
    artifacts_root: Path
    templates_dir: Path | None = None
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT
    api_token: str | None = None
    static_dir: Path | None = None
    providers: dict[str, ProviderAdapter] = field(default_factory=dict)
    overflow_policy: str = "reject"
    planner: PlannerSettings = field(default_factory=PlannerSettings)
    codegen: CodegenSettings = field(default_factory=CodegenSettings)
    engine: EngineConfig = field(default_factory=EngineConfig)
    policy: OrchestratorPolicy = field(default_factory=OrchestratorPolicy)
    max_render_workers: int | None = None


def default_config(data_dir: Path | None = None) -> ServiceConfig:
    """Built-in defaults rooted at data_dir (or ~/.manimator)."""
    return _assemble({}, data_dir_override=data_dir, env={})


def load_config(
    path: Path | str | None = None, env: Mapping[str, str] | None = None
) -> ServiceConfig:
    """Load the YAML config file (explicit path, else $MANIMATOR_CONFIG,
    else none) and apply environment overrides."""
    env = os.environ if env is None else env
    if path is None:
        path = env.get(CONFIG_PATH_ENV)
    raw: dict = {}
    if path is not None:
        raw = _read_yaml(Path(path))
    return _assemble(raw, data_dir_override=None, env=env)


def _read_yaml(path: Path) -> dict:
    try:
        loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"config file {path} is not valid YAML: {exc}") from exc
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigInvalid(f"config file {path} must be a mapping at the top level")
    return loaded


# --- section parsing --------------------------------------------------------

_TOP_KEYS = {
    "data_dir", "store_path", "cache_dir", "artifacts_root", "templates_dir",
    "server", "providers", "routes", "planning", "coding", "gateway",
    "engine", "render", "pipeline",
}


def _section(raw: dict, name: str, allowed: set[str]) -> dict:
    data = raw.get(name) or {}
    if not isinstance(data, dict):
        raise ConfigInvalid(f"section {name!r} must be a mapping")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigInvalid(f"unknown keys in {name!r}: {sorted(unknown)}")
    return data


def _path_or_none(value: Any) -> Path | None:
    return None if value is None else Path(str(value)).expanduser()


def _str_list(value: Any, context: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not value or not all(
        isinstance(v, str) for v in value
    ):
        raise ConfigInvalid(f"{context} must be a non-empty list of strings")
    return tuple(value)


def _route_from(data: Any, slot: str, documents_by_default: bool) -> ModelRoute:
    if not isinstance(data, dict):
        raise ConfigInvalid(f"routes.{slot} must be a mapping")
    unknown = set(data) - {"provider", "model", "supports_documents", "max_context"}
    if unknown:
        raise ConfigInvalid(f"unknown keys in routes.{slot}: {sorted(unknown)}")
    try:
        return ModelRoute(
            provider=str(data["provider"]),
            model_name=str(data["model"]),
            supports_documents=bool(
                data.get("supports_documents", documents_by_default)
            ),
            max_context_hint=data.get("max_context"),
        )
    except KeyError as exc:
        raise ConfigInvalid(f"routes.{slot} is missing {exc.args[0]!r}") from exc


def _providers_from(raw: dict) -> dict[str, ProviderAdapter]:
    data = raw.get("providers") or {}
    if not isinstance(data, dict):
        raise ConfigInvalid("section 'providers' must be a mapping")
    adapters: dict[str, ProviderAdapter] = {}
    for name, entry in data.items():
        if not isinstance(entry, dict) or "base_url" not in entry:
            raise ConfigInvalid(f"provider {name!r} needs at least a base_url")
        unknown = set(entry) - {"base_url", "chat_path"}
        if unknown:
            raise ConfigInvalid(f"unknown keys in provider {name!r}: {sorted(unknown)}")
        adapters[str(name)] = ProviderAdapter(
            name=str(name),
            base_url=str(entry["base_url"]),
            chat_path=str(entry.get("chat_path", "/chat/completions")),
        )
    return adapters


def _lint_from(data: dict) -> LintPolicy:
    defaults = LintPolicy()
    allow = data.get("import_allowlist")
    deny = data.get("forbidden")
    mandatory = data.get("mandatory_checks")
    return LintPolicy(
        import_allowlist=(
            frozenset(_str_list(allow, "coding.lint.import_allowlist"))
            if allow is not None else defaults.import_allowlist
        ),
        denylist=(
            frozenset(_str_list(deny, "coding.lint.forbidden"))
            if deny is not None else defaults.denylist
        ),
        mandatory_checks=(
            frozenset(_str_list(mandatory, "coding.lint.mandatory_checks"))
            if mandatory is not None else defaults.mandatory_checks
        ),
    )


def _assemble(
    raw: dict, data_dir_override: Path | None, env: Mapping[str, str]
) -> ServiceConfig:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown top-level keys: {sorted(unknown)}")

    server = _section(raw, "server", {"host", "port", "api_token", "static_dir"})
    routes = _section(raw, "routes", {"text", "document", "code"})
    planning = _section(raw, "planning", {"temperature", "max_output_tokens"})
    coding = _section(
        raw, "coding", {"temperature", "max_output_tokens", "max_attempts", "lint"}
    )
    gateway = _section(raw, "gateway", {"overflow_policy", "retry"})
    engine = _section(
        raw, "engine", {"argv", "compile_argv", "encoder_argv", "output_glob"}
    )
    render = _section(raw, "render", {"quality", "timeout_seconds", "max_workers"})
    pipeline = _section(raw, "pipeline", {"cache_enabled", "allow_render_retry"})

    data_dir = (
        data_dir_override
        or _path_or_none(env.get(DATA_DIR_ENV))
        or _path_or_none(raw.get("data_dir"))
        or Path.home() / ".manimator"
    )

    overflow_policy = str(gateway.get("overflow_policy", "reject"))
    if overflow_policy not in ("reject", "truncate"):
        raise ConfigInvalid(f"unknown overflow_policy: {overflow_policy!r}")

    port = env.get(PORT_ENV, server.get("port", DEFAULT_PORT))
    try:
        port = int(port)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"port must be an integer, got {port!r}")
    if not 1 <= port <= 65535:
        raise ConfigInvalid(f"port out of range: {port}")

    quality_name = str(render.get("quality", "low"))
    try:
        quality = RenderQuality(quality_name)
    except ValueError:
        raise ConfigInvalid(f"unknown render quality: {quality_name!r}")

    max_workers = render.get("max_workers")
    if max_workers is not None:
        max_workers = int(max_workers)
        if max_workers < 1:
            raise ConfigInvalid("render.max_workers must be >= 1")

    defaults = EngineConfig()
    argv_override = env.get(ENGINE_ARGV_ENV)
    if argv_override:
        engine_argv = tuple(shlex.split(argv_override))
    elif "argv" in engine:
        engine_argv = _str_list(engine["argv"], "engine.argv")
    else:
        engine_argv = defaults.engine_argv

    try:
        retry = RetryPolicy(**_section(gateway, "retry", {
            "max_attempts", "base_delay", "multiplier", "jitter",
        }))
        text_route = (
            _route_from(routes["text"], "text", False) if "text" in routes else None
        )
        document_route = (
            _route_from(routes["document"], "document", True)
            if "document" in routes else None
        )
        code_route = (
            _route_from(routes["code"], "code", False) if "code" in routes else None
        )
        planner = PlannerSettings(
            text_route=text_route,
            document_route=document_route,
            temperature=float(planning.get("temperature", 0.2)),
            max_output_tokens=int(planning.get("max_output_tokens", 2048)),
            retry=retry,
        )
        codegen = CodegenSettings(
            route=code_route,
            max_code_attempts=int(coding.get("max_attempts", 3)),
            temperature=float(coding.get("temperature", 0.2)),
            max_output_tokens=int(coding.get("max_output_tokens", 4096)),
            lint=_lint_from(_section(
                coding, "lint",
                {"import_allowlist", "forbidden", "mandatory_checks"},
            )),
            retry=retry,
        )
        engine_config = EngineConfig(
            engine_argv=engine_argv,
            compile_argv=(
                _str_list(engine["compile_argv"], "engine.compile_argv")
                if "compile_argv" in engine else defaults.compile_argv
            ),
            encoder_argv=(
                _str_list(engine["encoder_argv"], "engine.encoder_argv")
                if "encoder_argv" in engine else defaults.encoder_argv
            ),
            output_glob=str(engine.get("output_glob", defaults.output_glob)),
        )
        policy = OrchestratorPolicy(
            quality=quality,
            render_timeout_seconds=float(render.get("timeout_seconds", 600.0)),
            cache_enabled=bool(pipeline.get("cache_enabled", True)),
            allow_render_retry_to_coding=bool(
                pipeline.get("allow_render_retry", False)
            ),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"invalid config value: {exc}") from exc

    return ServiceConfig(
        data_dir=data_dir,
        store_path=_path_or_none(raw.get("store_path")) or data_dir / "jobs.db",
        cache_dir=_path_or_none(raw.get("cache_dir")) or data_dir / "cache",
        artifacts_root=(
            _path_or_none(raw.get("artifacts_root")) or data_dir / "artifacts"
        ),
        templates_dir=(
            _path_or_none(env.get(TEMPLATES_DIR_ENV))
            or _path_or_none(raw.get("templates_dir"))
        ),
        host=str(env.get(HOST_ENV, server.get("host", DEFAULT_HOST))),
        port=port,
        api_token=env.get(API_TOKEN_ENV, server.get("api_token")),
        static_dir=(
            _path_or_none(env.get(STATIC_DIR_ENV))
            or _path_or_none(server.get("static_dir"))
        ),
        providers=_providers_from(raw),
        overflow_policy=overflow_policy,
        planner=planner,
        codegen=codegen,
        engine=engine_config,
        policy=policy,
        max_render_workers=max_workers,
    )
