"""Stage 1: scene planning.

Builds the planning prompt (system prompt, few-shot examples, user
input), calls the chat gateway, and parses the reply into a validated
scene description. Parsing is deliberately tolerant of heading level,
case, and trailing colons, because LLM output drifts; everything else
is strict so downstream stages can rely on the shape.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .errors import (
    ConfigMissingRoute,
    EmptyKeyPoints,
    ManimatorError,
    MissingSection,
    Stage,
    StageError,
    UnbalancedLatex,
)
from .gateway import (
    ChatGateway,
    ChatMessage,
    ChatRequest,
    InlineDocumentPart,
    ModelRoute,
    RetryPolicy,
    complete_with_retry,
)
from .ingest import ArxivInput, InputSource, PdfInput, PromptInput
from .templates import TemplateSet

logger = logging.getLogger(__name__)

SECTION_TOPIC = "Topic"
SECTION_KEY_POINTS = "Key Points"
SECTION_VISUAL_ELEMENTS = "Visual Elements"
SECTION_STYLE = "Style"
SECTION_ORDER = (SECTION_TOPIC, SECTION_KEY_POINTS, SECTION_VISUAL_ELEMENTS, SECTION_STYLE)

EMPTY_PLACEHOLDER = "(none)"

_HEADING = re.compile(r"\s{0,3}(#{1,6})\s+(.*?)\s*\Z")
_LIST_ITEM = re.compile(r"\s*(?:[-*]|\d{1,3}[.)])\s+(.*?)\s*\Z")


def extract_latex_fragments(text: str) -> tuple[str, ...]:
    """Pull `$...$` spans out of a line of text, delimiters included.

    `\\$` is a literal dollar and never toggles. Raises UnbalancedLatex
    for an unterminated span or unbalanced braces inside a span.
    """
    fragments = []
    span_start = None
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            i += 2
            continue
        if ch == "$":
            if span_start is None:
                span_start = i
            else:
                fragments.append(text[span_start : i + 1])
                span_start = None
        i += 1
    if span_start is not None:
        raise UnbalancedLatex(text[span_start:])
    for fragment in fragments:
        depth = 0
        j = 0
        while j < len(fragment):
            ch = fragment[j]
            if ch == "\\" and j + 1 < len(fragment):
                j += 2
                continue
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth < 0:
                    raise UnbalancedLatex(fragment)
            j += 1
        if depth != 0:
            raise UnbalancedLatex(fragment)
    return tuple(fragments)


def _check_line(value: str, what: str, allow_hash: bool = False) -> None:
    if "\n" in value:
        raise ValueError(f"{what} must be a single line")
    if value != value.strip():
        raise ValueError(f"{what} must be stripped")
    if not allow_hash and value.startswith("#"):
        raise ValueError(f"{what} must not start with '#'")


@dataclass(frozen=True)
class KeyPoint:
    """One teaching point; latex_fragments are derived from the text."""

    text: str
    latex_fragments: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.text:
            raise ValueError("key point text must be non-empty")
        # list items never collide with heading syntax, '#' is fine here
        _check_line(self.text, "key point text", allow_hash=True)
        if self.latex_fragments != extract_latex_fragments(self.text):
            raise ValueError("latex_fragments do not match the text")

    @classmethod
    def from_text(cls, text: str) -> "KeyPoint":
        return cls(text, extract_latex_fragments(text))


@dataclass(frozen=True)
class SceneDescription:
    """Validated Stage-1 output: what the animation should teach and show."""

    topic: str
    key_points: tuple[KeyPoint, ...]
    visual_elements: tuple[str, ...] = ()
    style: str = ""

    def __post_init__(self):
        if not self.topic:
            raise ValueError("topic must be non-empty")
        _check_line(self.topic, "topic")
        if not self.key_points:
            raise EmptyKeyPoints()
        for element in self.visual_elements:
            if not element:
                raise ValueError("visual element must be non-empty")
            _check_line(element, "visual element", allow_hash=True)
            if element == EMPTY_PLACEHOLDER:
                raise ValueError(f"{EMPTY_PLACEHOLDER!r} is a reserved placeholder")
        if self.style:
            _check_line(self.style, "style")

    @property
    def all_latex_fragments(self) -> tuple[str, ...]:
        out = []
        for kp in self.key_points:
            out.extend(kp.latex_fragments)
        return tuple(out)


def _canonical_heading(raw: str) -> str | None:
    name = re.sub(r"\s+", " ", raw.rstrip(": ").strip()).lower()
    for section in SECTION_ORDER:
        if name == section.lower():
            return section
    return None


def _collect_items(lines: list[str]) -> list[str]:
    """Parse list items; bare continuation lines join the previous item."""
    items: list[str] = []
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        match = _LIST_ITEM.fullmatch(line)
        if match:
            if match.group(1):
                items.append(match.group(1))
        elif items:
            items[-1] = items[-1] + " " + stripped
        # prose before the first item is ignored
    return items


def parse_scene_description(text: str) -> SceneDescription:
    """Parse LLM Markdown output into a SceneDescription.

    Headings are matched case-insensitively at any level, with trailing
    colons tolerated; a duplicated section keeps its first occurrence.
    Raises MissingSection, EmptyKeyPoints, or UnbalancedLatex; never
    anything else, however mangled the input.
    """
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in text.splitlines():
        match = _HEADING.fullmatch(line)
        if match:
            section = _canonical_heading(match.group(2))
            if section is None or section in sections:
                current = None  # unknown or duplicate heading: skip its body
            else:
                current = sections.setdefault(section, [])
        elif current is not None:
            current.append(line)

    for section in SECTION_ORDER:
        if section not in sections:
            raise MissingSection(section)

    topic = " ".join(
        part for line in sections[SECTION_TOPIC] if (part := line.strip())
    )
    if not topic or topic.startswith("#"):
        raise MissingSection(SECTION_TOPIC)

    point_texts = _collect_items(sections[SECTION_KEY_POINTS])
    if not point_texts:
        raise EmptyKeyPoints()
    key_points = tuple(KeyPoint.from_text(t) for t in point_texts)

    elements = tuple(
        item
        for item in _collect_items(sections[SECTION_VISUAL_ELEMENTS])
        if item != EMPTY_PLACEHOLDER
    )

    style = " ".join(
        part for line in sections[SECTION_STYLE] if (part := line.strip())
    )
    if style == EMPTY_PLACEHOLDER or style.startswith("#"):
        style = ""

    return SceneDescription(topic, key_points, elements, style)


def serialize_scene_description(sd: SceneDescription) -> str:
    """Canonical Markdown form; parse(serialize(sd)) == sd."""
    lines = [f"# {SECTION_TOPIC}", "", sd.topic, ""]
    lines += [f"# {SECTION_KEY_POINTS}", ""]
    lines += [f"- {kp.text}" for kp in sd.key_points]
    lines += ["", f"# {SECTION_VISUAL_ELEMENTS}", ""]
    if sd.visual_elements:
        lines += [f"- {el}" for el in sd.visual_elements]
    else:
        lines.append(f"- {EMPTY_PLACEHOLDER}")
    lines += ["", f"# {SECTION_STYLE}", "", sd.style or EMPTY_PLACEHOLDER]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PlannerSettings:
    """Routes and knobs for the planning stage."""

    text_route: ModelRoute | None = None
    document_route: ModelRoute | None = None
    temperature: float = 0.2
    max_output_tokens: int = 2048
    retry: RetryPolicy = field(default_factory=RetryPolicy)


def select_route(source: InputSource, settings: PlannerSettings) -> ModelRoute:
    """Prompt inputs go to the text route; PDF-bearing inputs go to the
    document-capable route."""
    if isinstance(source, PromptInput):
        if settings.text_route is None:
            raise ConfigMissingRoute("no text route configured for prompt inputs")
        return settings.text_route
    if settings.document_route is None:
        raise ConfigMissingRoute("no document route configured for PDF inputs")
    if not settings.document_route.supports_documents:
        raise ConfigMissingRoute(
            f"configured document route {settings.document_route.route_id} "
            "does not accept inline documents"
        )
    return settings.document_route


@dataclass(frozen=True)
class PlanPromptBundle:
    """Everything the planning prompt is assembled from."""

    system_prompt: str
    few_shot: tuple[tuple[str, str], ...]
    user_payload: InputSource

    def __post_init__(self):
        if not self.few_shot:
            raise ValueError("few_shot examples must be non-empty")


def _user_message_for(source: InputSource) -> ChatMessage:
    if isinstance(source, PromptInput):
        return ChatMessage.user(source.text)
    if isinstance(source, (PdfInput, ArxivInput)):
        return ChatMessage.user(InlineDocumentPart(source.document))
    raise TypeError(f"unsupported input source: {type(source).__name__}")


def build_plan_prompt(
    bundle: PlanPromptBundle,
    route: ModelRoute,
    settings: PlannerSettings = PlannerSettings(),
) -> ChatRequest:
    """1 system + 2 messages per few-shot pair + 1 final user message."""
    messages = [ChatMessage.system(bundle.system_prompt)]
    for example_input, example_output in bundle.few_shot:
        messages.append(ChatMessage.user(example_input))
        messages.append(ChatMessage.assistant(example_output))
    messages.append(_user_message_for(bundle.user_payload))
    return ChatRequest(
        route=route,
        messages=tuple(messages),
        temperature=settings.temperature,
        max_output_tokens=settings.max_output_tokens,
    )


def plan(
    source: InputSource,
    gateway: ChatGateway,
    settings: PlannerSettings,
    templates: TemplateSet,
) -> SceneDescription:
    """Run the full planning stage; failures carry the Planning tag."""
    try:
        route = select_route(source, settings)
        bundle = PlanPromptBundle(
            system_prompt=templates.plan_system,
            few_shot=templates.plan_examples,
            user_payload=source,
        )
        request = build_plan_prompt(bundle, route, settings)
        response = complete_with_retry(gateway, request, settings.retry)
        logger.info("plan reply: %d chars via %s", len(response.text), route.route_id)
        return parse_scene_description(response.text)
    except ManimatorError as exc:
        raise StageError(Stage.PLANNING, str(exc)) from exc
