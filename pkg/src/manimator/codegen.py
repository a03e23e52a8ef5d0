"""Stage 2: Manim code generation.

Builds the code prompt from a scene description, extracts the script
from the LLM reply, and statically validates it. Validation is lexical
(regex/token level), never a full parse: the scripts are Python for the
render runtime, but this module stays independent of it. Deep syntax
checking belongs to the renderer's compile probe.

Generated code is untrusted, so the import allowlist and the call
denylist are mandatory lint checks, not style advice.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace

from .errors import (
    CodeGenExhausted,
    GatewayError,
    NoScriptFound,
    Stage,
    StageError,
)
from .gateway import (
    ChatGateway,
    ChatMessage,
    ChatRequest,
    ModelRoute,
    RetryPolicy,
    complete_with_retry,
)
from .planning import SceneDescription, serialize_scene_description
from .templates import TemplateSet

logger = logging.getLogger(__name__)

_FENCE = re.compile(r"\s{0,3}(`{3,})[^`]*\Z")
_CLASS_DECL = re.compile(r"^\s*class\s+([A-Za-z_]\w*)\s*\(([^)]*)\)\s*:", re.MULTILINE)
_IMPORT = re.compile(r"^\s*(?:import|from)\s+([A-Za-z_][\w.]*)", re.MULTILINE)
_WAIT_CALL = re.compile(r"\.wait\s*\(")
_CONSTRUCT = re.compile(r"^\s*def\s+construct\s*\(", re.MULTILINE)

DEFAULT_IMPORT_ALLOWLIST = frozenset({"manim", "math", "numpy"})
DEFAULT_DENYLIST = frozenset(
    {
        "os", "sys", "subprocess", "socket", "shutil", "pathlib",
        "urllib", "requests", "http", "open", "eval", "exec",
        "__import__", "globals", "breakpoint",
    }
)

CHECK_SINGLE_SCENE_CLASS = "single_scene_class"
CHECK_HAS_CONSTRUCT = "has_construct"
CHECK_HAS_WAIT = "has_wait"
CHECK_IMPORTS_ALLOWED = "imports_allowed"
CHECK_NO_FORBIDDEN_CALLS = "no_forbidden_calls"
CHECK_SCRIPT_EXTRACTED = "script_extracted"
CHECK_CLEANUP = "scene_cleanup"  # advisory

MANDATORY_CHECKS = frozenset(
    {
        CHECK_SINGLE_SCENE_CLASS,
        CHECK_HAS_CONSTRUCT,
        CHECK_HAS_WAIT,
        CHECK_IMPORTS_ALLOWED,
        CHECK_NO_FORBIDDEN_CALLS,
    }
)

_CLEANUP_MARKERS = ("FadeOut", "Uncreate", "self.clear", "self.remove")


@dataclass(frozen=True)
class GeneratedScript:
    source: str
    scene_class: str
    attempt: int = 1

    def __post_init__(self):
        if not self.source.strip():
            raise ValueError("script source must be non-empty")
        if not self.scene_class.isidentifier():
            raise ValueError(f"not a valid class name: {self.scene_class!r}")
        if self.attempt < 1:
            raise ValueError("attempt must be >= 1")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    mandatory: bool = True


@dataclass(frozen=True)
class LintReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.mandatory)

    @property
    def failures(self) -> tuple[CheckResult, ...]:
        return tuple(c for c in self.checks if c.mandatory and not c.passed)

    def describe_failures(self) -> str:
        return "\n".join(f"- {c.name}: {c.detail}" for c in self.failures)


@dataclass(frozen=True)
class LintPolicy:
    import_allowlist: frozenset[str] = DEFAULT_IMPORT_ALLOWLIST
    denylist: frozenset[str] = DEFAULT_DENYLIST
    mandatory_checks: frozenset[str] = MANDATORY_CHECKS


def _fenced_blocks(text: str) -> list[str]:
    blocks = []
    current: list[str] | None = None
    for line in text.splitlines():
        if _FENCE.fullmatch(line):
            if current is None:
                current = []
            else:
                blocks.append("\n".join(current))
                current = None
        elif current is not None:
            current.append(line)
    # an unterminated fence still counts: LLMs drop the closing fence
    if current:
        blocks.append("\n".join(current))
    return blocks


def _scene_classes(source: str) -> list[str]:
    found = []
    for match in _CLASS_DECL.finditer(source):
        bases = [b.strip() for b in match.group(2).split(",")]
        for base in bases:
            tail = base.split(".")[-1].split("[")[0].strip()
            if tail.endswith("Scene") and tail.isidentifier():
                found.append(match.group(1))
                break
    return found


def extract_script(response_text: str) -> GeneratedScript:
    """Pull the scene script out of an LLM reply.

    The longest fenced block wins (prose and import snippets lose);
    with no fences the whole reply is the candidate. The scene class is
    the first class whose base list has an identifier ending in Scene.
    The returned source is the block byte-for-byte, never reformatted.
    """
    blocks = _fenced_blocks(response_text)
    candidate = max(blocks, key=len) if blocks else response_text
    classes = _scene_classes(candidate)
    if not classes:
        raise NoScriptFound("reply contains no class deriving from a Scene base")
    return GeneratedScript(source=candidate, scene_class=classes[0])


def _check_imports(source: str, allowlist: frozenset[str]) -> CheckResult:
    offenders = sorted(
        {
            root
            for m in _IMPORT.finditer(source)
            if (root := m.group(1).split(".")[0]) not in allowlist
        }
    )
    if offenders:
        detail = f"imports outside the allowlist: {', '.join(offenders)}"
        return CheckResult(CHECK_IMPORTS_ALLOWED, False, detail)
    return CheckResult(CHECK_IMPORTS_ALLOWED, True, "all imports allowlisted")


def _check_denylist(source: str, denylist: frozenset[str]) -> CheckResult:
    hits = sorted(
        name
        for name in denylist
        if re.search(rf"\b{re.escape(name)}\b", source)
    )
    if hits:
        detail = f"forbidden names present: {', '.join(hits)}"
        return CheckResult(CHECK_NO_FORBIDDEN_CALLS, False, detail)
    return CheckResult(CHECK_NO_FORBIDDEN_CALLS, True, "no forbidden names")


def _check_cleanup(source: str) -> CheckResult:
    tail_lines = [l for l in source.splitlines() if l.strip()][-15:]
    tail = "\n".join(tail_lines)
    found = any(marker in tail for marker in _CLEANUP_MARKERS)
    detail = "cleanup call near scene end" if found else (
        "no FadeOut/clear/remove near the end of the scene"
    )
    return CheckResult(CHECK_CLEANUP, found, detail, mandatory=False)


def lint_script(script: GeneratedScript, policy: LintPolicy = LintPolicy()) -> LintReport:
    """Static checklist over the script text. Pure and deterministic;
    always returns a report, never raises."""
    source = script.source
    scene_classes = _scene_classes(source)
    results = [
        CheckResult(
            CHECK_SINGLE_SCENE_CLASS,
            len(scene_classes) == 1,
            f"scene classes found: {scene_classes or 'none'}",
        ),
        CheckResult(
            CHECK_HAS_CONSTRUCT,
            bool(_CONSTRUCT.search(source)),
            "construct method defined" if _CONSTRUCT.search(source)
            else "no construct method",
        ),
        CheckResult(
            CHECK_HAS_WAIT,
            bool(_WAIT_CALL.search(source)),
            "pacing wait() present" if _WAIT_CALL.search(source)
            else "no wait() pacing calls",
        ),
        _check_imports(source, policy.import_allowlist),
        _check_denylist(source, policy.denylist),
        _check_cleanup(source),
    ]
    checks = tuple(
        replace(c, mandatory=c.name in policy.mandatory_checks) if c.mandatory
        else c
        for c in results
    )
    return LintReport(checks)


@dataclass(frozen=True)
class CodegenSettings:
    """Route and knobs for the coding stage."""

    route: ModelRoute | None = None
    max_code_attempts: int = 3
    temperature: float = 0.2
    max_output_tokens: int = 4096
    lint: LintPolicy = field(default_factory=LintPolicy)
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def __post_init__(self):
        if self.max_code_attempts < 1:
            raise ValueError("max_code_attempts must be >= 1")


def _fence(code: str) -> str:
    return f"```python\n{code}\n```"


def build_code_prompt(
    sd: SceneDescription,
    templates: TemplateSet,
    settings: CodegenSettings = CodegenSettings(route=ModelRoute("mock", "coder")),
) -> ChatRequest:
    """System prompt, few-shot (description, fenced script) pairs, then
    the canonical serialization of this scene as the final user turn."""
    messages = [ChatMessage.system(templates.code_system)]
    for example_input, example_output in templates.code_examples:
        messages.append(ChatMessage.user(example_input))
        messages.append(ChatMessage.assistant(_fence(example_output)))
    messages.append(ChatMessage.user(serialize_scene_description(sd)))
    return ChatRequest(
        route=settings.route,
        messages=tuple(messages),
        temperature=settings.temperature,
        max_output_tokens=settings.max_output_tokens,
    )


def _extraction_failure_report(error: NoScriptFound) -> LintReport:
    return LintReport(
        (CheckResult(CHECK_SCRIPT_EXTRACTED, False, str(error)),)
    )


def _corrective_message(report: LintReport) -> ChatMessage:
    return ChatMessage.user(
        "The script failed validation:\n"
        f"{report.describe_failures()}\n"
        "Reply with the complete corrected script in a single fenced "
        "Python code block. Fix every listed problem and change nothing else."
    )


def generate_code(
    sd: SceneDescription,
    gateway: ChatGateway,
    settings: CodegenSettings,
    templates: TemplateSet,
) -> GeneratedScript:
    """Prompt, extract, lint; feed failures back as a corrective turn.

    Makes at most settings.max_code_attempts gateway round-trips and
    returns the first lint-passed script with its attempt number.
    """
    request = build_code_prompt(sd, templates, settings)
    last_report: LintReport | None = None
    for attempt in range(1, settings.max_code_attempts + 1):
        try:
            response = complete_with_retry(gateway, request, settings.retry)
        except GatewayError as exc:
            raise StageError(Stage.CODING, str(exc)) from exc
        try:
            script = extract_script(response.text)
        except NoScriptFound as exc:
            last_report = _extraction_failure_report(exc)
        else:
            last_report = lint_script(script, settings.lint)
            if last_report.passed:
                logger.info(
                    "script accepted on attempt %d (class %s)",
                    attempt, script.scene_class,
                )
                return replace(script, attempt=attempt)
        logger.info("attempt %d rejected: %s", attempt, last_report.describe_failures())
        request = request.with_appended(
            ChatMessage.assistant(response.text or "(empty reply)"),
            _corrective_message(last_report),
        )
    raise CodeGenExhausted(
        f"no lint-passed script after {settings.max_code_attempts} attempts",
        last_report,
    )
