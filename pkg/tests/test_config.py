"""Tests for config loading: defaults, YAML parsing, environment
overrides, and rejection of malformed files."""

import pytest

from manimator.config import ServiceConfig, default_config, load_config
from manimator.errors import ConfigInvalid
from manimator.rendering import RenderQuality

FULL_YAML = """\
data_dir: /srv/animations

server:
  host: 0.0.0.0
  port: 9001
  api_token: hunter2
  static_dir: /srv/animations/ui

templates_dir: /srv/animations/templates

providers:
  acme:
    base_url: https://api.acme.example/v1

routes:
  text: {provider: acme, model: quick-text}
  document: {provider: acme, model: doc-reader, max_context: 200000}
  code: {provider: acme, model: coder}

planning:
  temperature: 0.1
  max_output_tokens: 1024

coding:
  temperature: 0.3
  max_attempts: 5
  lint:
    import_allowlist: [manim, math]

gateway:
  overflow_policy: truncate
  retry: {max_attempts: 4, base_delay: 0.25}

engine:
  argv: [render-engine, "{quality}", "{script}", "{scene}"]
  output_glob: "out/**/*.mp4"

render:
  quality: medium
  timeout_seconds: 120
  max_workers: 3

pipeline:
  cache_enabled: false
  allow_render_retry: true
"""


def write_config(tmp_path, text):
    path = tmp_path / "service.yaml"
    path.write_text(text, encoding="utf-8")
    return path


class TestDefaults:
    def test_default_config_derives_paths_from_data_dir(self, tmp_path):
        cfg = default_config(tmp_path)
        assert cfg.data_dir == tmp_path
        assert cfg.store_path == tmp_path / "jobs.db"
        assert cfg.cache_dir == tmp_path / "cache"
        assert cfg.artifacts_root == tmp_path / "artifacts"
        assert cfg.templates_dir is None  # packaged templates

    def test_default_knobs(self, tmp_path):
        cfg = default_config(tmp_path)
        assert cfg.host == "127.0.0.1"
        assert cfg.api_token is None
        assert cfg.overflow_policy == "reject"
        assert cfg.policy.cache_enabled is True
        assert cfg.policy.allow_render_retry_to_coding is False
        assert cfg.policy.quality is RenderQuality.LOW
        assert cfg.planner.text_route is None
        assert cfg.codegen.max_code_attempts == 3

    def test_load_without_file_or_env_equals_defaults(self):
        cfg = load_config(env={})
        assert isinstance(cfg, ServiceConfig)
        assert cfg.store_path == cfg.data_dir / "jobs.db"


class TestYamlFile:
    def test_full_file_round_trip(self, tmp_path):
        cfg = load_config(write_config(tmp_path, FULL_YAML), env={})
        assert str(cfg.data_dir) == "/srv/animations"
        assert cfg.host == "0.0.0.0"
        assert cfg.port == 9001
        assert cfg.api_token == "hunter2"
        assert str(cfg.static_dir) == "/srv/animations/ui"
        assert str(cfg.templates_dir) == "/srv/animations/templates"
        assert cfg.providers["acme"].base_url == "https://api.acme.example/v1"
        assert cfg.providers["acme"].chat_path == "/chat/completions"
        assert cfg.planner.text_route.route_id == "acme/quick-text"
        assert cfg.planner.document_route.supports_documents is True
        assert cfg.planner.document_route.max_context_hint == 200000
        assert cfg.planner.temperature == 0.1
        assert cfg.planner.max_output_tokens == 1024
        assert cfg.planner.retry.max_attempts == 4
        assert cfg.planner.retry.base_delay == 0.25
        assert cfg.codegen.route.route_id == "acme/coder"
        assert cfg.codegen.max_code_attempts == 5
        assert cfg.codegen.temperature == 0.3
        assert cfg.codegen.lint.import_allowlist == frozenset({"manim", "math"})
        assert cfg.overflow_policy == "truncate"
        assert cfg.engine.engine_argv[0] == "render-engine"
        assert cfg.engine.output_glob == "out/**/*.mp4"
        assert cfg.policy.quality is RenderQuality.MEDIUM
        assert cfg.policy.render_timeout_seconds == 120.0
        assert cfg.policy.cache_enabled is False
        assert cfg.policy.allow_render_retry_to_coding is True
        assert cfg.max_render_workers == 3

    def test_partial_file_keeps_defaults_elsewhere(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "server: {port: 9999}\n"), env={})
        assert cfg.port == 9999
        assert cfg.host == "127.0.0.1"
        assert cfg.codegen.lint.import_allowlist  # default allowlist intact

    def test_unspecified_lint_fields_keep_defaults(self, tmp_path):
        cfg = load_config(
            write_config(tmp_path, "coding:\n  lint:\n    forbidden: [telnetlib]\n"),
            env={},
        )
        assert cfg.codegen.lint.denylist == frozenset({"telnetlib"})
        assert "manim" in cfg.codegen.lint.import_allowlist

    def test_empty_file_is_defaults(self, tmp_path):
        cfg = load_config(write_config(tmp_path, ""), env={})
        assert cfg.port == 8621

    def test_config_path_from_environment(self, tmp_path):
        path = write_config(tmp_path, "server: {port: 7777}\n")
        cfg = load_config(env={"MANIMATOR_CONFIG": str(path)})
        assert cfg.port == 7777


class TestEnvironmentOverrides:
    def test_env_beats_file(self, tmp_path):
        path = write_config(tmp_path, FULL_YAML)
        cfg = load_config(path, env={
            "MANIMATOR_HOST": "10.0.0.5",
            "MANIMATOR_PORT": "9002",
            "MANIMATOR_API_TOKEN": "from-env",
            "MANIMATOR_DATA_DIR": str(tmp_path / "envdata"),
            "MANIMATOR_STATIC_DIR": str(tmp_path / "envui"),
            "MANIMATOR_TEMPLATES_DIR": str(tmp_path / "envtpl"),
        })
        assert cfg.host == "10.0.0.5"
        assert cfg.port == 9002
        assert cfg.api_token == "from-env"
        assert cfg.data_dir == tmp_path / "envdata"
        assert cfg.static_dir == tmp_path / "envui"
        assert cfg.templates_dir == tmp_path / "envtpl"

    def test_engine_argv_env_override(self, tmp_path):
        path = write_config(tmp_path, FULL_YAML)
        cfg = load_config(path, env={
            "MANIMATOR_ENGINE_ARGV": "/stub/engine {quality} {script} {scene}",
        })
        assert cfg.engine.engine_argv == (
            "/stub/engine", "{quality}", "{script}", "{scene}",
        )

    def test_explicit_paths_beat_derived_ones(self, tmp_path):
        cfg = load_config(
            write_config(tmp_path, "data_dir: /d\nstore_path: /elsewhere/jobs.db\n"),
            env={},
        )
        assert str(cfg.store_path) == "/elsewhere/jobs.db"
        assert str(cfg.cache_dir) == "/d/cache"


class TestRejection:
    @pytest.mark.parametrize("text,needle", [
        ("nonsense_key: 1\n", "unknown top-level"),
        ("server: {prot: 80}\n", "unknown keys in 'server'"),
        ("server: {port: zero}\n", "port"),
        ("server: {port: 99999}\n", "out of range"),
        ("routes: {text: {provider: p}}\n", "missing 'model'"),
        ("routes: {text: {provider: p, model: m, extra: 1}}\n", "routes.text"),
        ("gateway: {overflow_policy: maybe}\n", "overflow_policy"),
        ("render: {quality: ultra}\n", "quality"),
        ("render: {max_workers: 0}\n", "max_workers"),
        ("coding: {max_attempts: 0}\n", "invalid config value"),
        ("gateway: {retry: {max_attempts: 0}}\n", "invalid config value"),
        ("engine: {argv: []}\n", "engine.argv"),
        ("engine: {argv: [1, 2]}\n", "engine.argv"),
        ("providers: {p: {}}\n", "base_url"),
        ("server: [1, 2]\n", "must be a mapping"),
        ("- a list\n- not a mapping\n", "top level"),
        ("server: {port: 80\n", "not valid YAML"),
    ])
    def test_bad_files_raise_config_invalid(self, tmp_path, text, needle):
        with pytest.raises(ConfigInvalid) as excinfo:
            load_config(write_config(tmp_path, text), env={})
        assert needle in str(excinfo.value)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(ConfigInvalid):
            load_config(tmp_path / "absent.yaml", env={})
