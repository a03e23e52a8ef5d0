"""Provider-agnostic chat-completion client.

One JSON chat-completion wire shape, adapted per provider by thin
configuration-selected adapters. Model names are configuration, never
constants. A deterministic mock gateway keyed on the request digest makes
the whole pipeline testable offline.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import random
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

import httpx

from .errors import (
    ContextOverflow,
    GatewayTimeout,
    ProviderError,
    RouteUnsupported,
)
from .ingest import EncodedPdf

API_KEY_ENV_TEMPLATE = "MANIMATOR_{provider}_API_KEY"


class Role(enum.Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class InlineDocumentPart:
    document: EncodedPdf
    media_type: str = "application/pdf"


Part = TextPart | InlineDocumentPart


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    parts: tuple[Part, ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("message must have at least one part")
        if self.role is not Role.USER and any(
            isinstance(p, InlineDocumentPart) for p in self.parts
        ):
            raise ValueError("inline documents are only allowed in user messages")

    @classmethod
    def system(cls, text: str) -> "ChatMessage":
        return cls(Role.SYSTEM, (TextPart(text),))

    @classmethod
    def user(cls, *parts: Part | str) -> "ChatMessage":
        return cls(Role.USER, tuple(TextPart(p) if isinstance(p, str) else p for p in parts))

    @classmethod
    def assistant(cls, text: str) -> "ChatMessage":
        return cls(Role.ASSISTANT, (TextPart(text),))

    def has_document(self) -> bool:
        return any(isinstance(p, InlineDocumentPart) for p in self.parts)


@dataclass(frozen=True)
class ModelRoute:
    """Where a request goes: provider adapter name + model identifier."""

    provider: str
    model_name: str
    supports_documents: bool = False
    max_context_hint: int | None = None

    @property
    def route_id(self) -> str:
        return f"{self.provider}/{self.model_name}"


@dataclass(frozen=True)
class ChatRequest:
    route: ModelRoute
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_output_tokens: int = 4096

    def __post_init__(self):
        if not self.messages:
            raise ValueError("request must have at least one message")
        system_positions = [
            i for i, m in enumerate(self.messages) if m.role is Role.SYSTEM
        ]
        if system_positions and (len(system_positions) > 1 or system_positions[0] != 0):
            raise ValueError("a system message must be unique and come first")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def has_document(self) -> bool:
        return any(m.has_document() for m in self.messages)

    def with_appended(self, *messages: ChatMessage) -> "ChatRequest":
        return ChatRequest(
            route=self.route,
            messages=self.messages + tuple(messages),
            temperature=self.temperature,
            max_output_tokens=self.max_output_tokens,
        )


class FinishReason(enum.Enum):
    STOP = "stop"
    LENGTH = "length"
    ERROR = "error"


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int
    output_tokens: int


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: FinishReason
    usage: TokenUsage | None = None

    def __post_init__(self):
        if not self.text and self.finish_reason is not FinishReason.ERROR:
            raise ValueError("empty text is only allowed with finish_reason=error")


def _part_fingerprint(part: Part) -> dict:
    if isinstance(part, TextPart):
        return {"type": "text", "text": part.text}
    return {
        "type": "document",
        "media_type": part.media_type,
        "digest": part.document.original_digest,
        "compressed": part.document.compressed,
    }


def message_digest(messages: tuple[ChatMessage, ...]) -> str:
    """Stable content hash of a message list (documents by digest)."""
    canon = [
        {"role": m.role.value, "parts": [_part_fingerprint(p) for p in m.parts]}
        for m in messages
    ]
    blob = json.dumps(canon, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _check_route(request: ChatRequest) -> None:
    if request.has_document() and not request.route.supports_documents:
        raise RouteUnsupported(
            f"route {request.route.route_id} does not accept inline documents"
        )


def _estimate_tokens(request: ChatRequest) -> int:
    # crude chars/4 heuristic; the hint is advisory
    chars = 0
    for m in request.messages:
        for p in m.parts:
            chars += len(p.text) if isinstance(p, TextPart) else len(p.document.payload)
    return chars // 4


class ChatGateway(ABC):
    """Chat-completion client interface. Implementations must be safe to
    share across concurrent jobs and must never mutate requests."""

    @abstractmethod
    def complete(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError


class MockChatGateway(ChatGateway):
    """Deterministic offline gateway.

    Replies are looked up by message digest first, then by an optional
    responder callable, which must itself be a deterministic function of
    the request. Every call is recorded for call-count assertions.
    """

    def __init__(
        self,
        replies: dict[str, str] | None = None,
        responder: Callable[[ChatRequest], str] | None = None,
    ):
        self.replies = dict(replies or {})
        self.responder = responder
        self.calls: list[ChatRequest] = []

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, request: ChatRequest) -> ChatResponse:
        _check_route(request)
        self.calls.append(request)
        digest = message_digest(request.messages)
        if digest in self.replies:
            return ChatResponse(self.replies[digest], FinishReason.STOP)
        if self.responder is not None:
            return ChatResponse(self.responder(request), FinishReason.STOP)
        raise ProviderError(f"no canned reply for digest {digest[:12]}", status=None)


@dataclass(frozen=True)
class ProviderAdapter:
    """Wire-level description of one provider's chat endpoint."""

    name: str
    base_url: str
    chat_path: str = "/chat/completions"

    @property
    def api_key_env(self) -> str:
        return API_KEY_ENV_TEMPLATE.format(provider=self.name.upper().replace("-", "_"))

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env)


def _wire_part(part: Part) -> dict:
    if isinstance(part, TextPart):
        return {"type": "text", "text": part.text}
    return {
        "type": "document",
        "media_type": part.media_type,
        "data": part.document.payload,
        "compressed": part.document.compressed,
    }


def _wire_message(message: ChatMessage) -> dict:
    if len(message.parts) == 1 and isinstance(message.parts[0], TextPart):
        content = message.parts[0].text
    else:
        content = [_wire_part(p) for p in message.parts]
    return {"role": message.role.value, "content": content}


_FINISH_REASONS = {"stop": FinishReason.STOP, "length": FinishReason.LENGTH}


class HttpChatGateway(ChatGateway):
    """Live gateway speaking the adapted JSON chat-completion shape."""

    def __init__(
        self,
        adapters: dict[str, ProviderAdapter],
        client: httpx.Client | None = None,
        timeout: float = 120.0,
        overflow_policy: str = "reject",
    ):
        if overflow_policy not in ("reject", "truncate"):
            raise ValueError(f"unknown overflow policy: {overflow_policy!r}")
        self.adapters = adapters
        self.client = client or httpx.Client(timeout=timeout)
        self.overflow_policy = overflow_policy

    def _apply_overflow_policy(self, request: ChatRequest) -> ChatRequest:
        hint = request.route.max_context_hint
        if hint is None or _estimate_tokens(request) <= hint:
            return request
        if self.overflow_policy == "reject":
            raise ContextOverflow(
                f"estimated input exceeds the {hint}-token hint for "
                f"{request.route.route_id}"
            )
        # truncate: trim the final user text part until the estimate fits
        messages = list(request.messages)
        last = messages[-1]
        trimmed_parts = []
        excess_chars = (_estimate_tokens(request) - hint) * 4
        for part in last.parts:
            if isinstance(part, TextPart) and excess_chars > 0:
                keep = max(0, len(part.text) - excess_chars)
                excess_chars -= len(part.text) - keep
                if keep:
                    trimmed_parts.append(TextPart(part.text[:keep]))
            else:
                trimmed_parts.append(part)
        if not trimmed_parts:
            raise ContextOverflow("cannot truncate request below the context hint")
        messages[-1] = ChatMessage(last.role, tuple(trimmed_parts))
        truncated = ChatRequest(
            route=request.route,
            messages=tuple(messages),
            temperature=request.temperature,
            max_output_tokens=request.max_output_tokens,
        )
        if _estimate_tokens(truncated) > hint:
            raise ContextOverflow("cannot truncate request below the context hint")
        return truncated

    def complete(self, request: ChatRequest) -> ChatResponse:
        _check_route(request)
        request = self._apply_overflow_policy(request)
        adapter = self.adapters.get(request.route.provider)
        if adapter is None:
            raise ProviderError(
                f"no adapter configured for provider {request.route.provider!r}",
                status=None,
            )
        payload = {
            "model": request.route.model_name,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
            "messages": [_wire_message(m) for m in request.messages],
        }
        headers = {"Content-Type": "application/json"}
        key = adapter.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = adapter.base_url.rstrip("/") + adapter.chat_path
        try:
            response = self.client.post(url, json=payload, headers=headers)
        except httpx.TimeoutException as exc:
            raise GatewayTimeout(f"provider call timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise ProviderError(f"transport error: {exc}", status=None, retryable=True) from exc
        if response.status_code != 200:
            raise ProviderError(
                f"provider returned {response.status_code}: {response.text[:200]}",
                status=response.status_code,
                retryable=_status_retryable(response.status_code),
            )
        return _parse_completion(response)


def _status_retryable(status: int) -> bool:
    # rate limits, request timeouts, and server-side failures are worth
    # retrying; other 4xx are caller errors
    return status == 429 or status == 408 or status >= 500


def _parse_completion(response: httpx.Response) -> ChatResponse:
    try:
        body = response.json()
        choice = body["choices"][0]
        text = choice["message"]["content"] or ""
        finish = _FINISH_REASONS.get(choice.get("finish_reason"), FinishReason.ERROR)
        usage = None
        if isinstance(body.get("usage"), dict):
            usage = TokenUsage(
                input_tokens=int(body["usage"].get("prompt_tokens", 0)),
                output_tokens=int(body["usage"].get("completion_tokens", 0)),
            )
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ProviderError(f"malformed provider response: {exc}", status=200) from exc
    if not text:
        return ChatResponse("", FinishReason.ERROR, usage)
    return ChatResponse(text, finish, usage)


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 0.5
    multiplier: float = 2.0
    jitter: float = 0.1

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


def _is_retryable(exc: Exception) -> bool:
    return bool(getattr(exc, "retryable", False))


def complete_with_retry(
    gateway: ChatGateway,
    request: ChatRequest,
    policy: RetryPolicy = RetryPolicy(),
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
) -> ChatResponse:
    """Call the gateway, retrying retryable errors with jittered
    exponential backoff. Returns the first success or raises the last
    error; never makes more than policy.max_attempts calls."""
    rng = rng or random.Random()
    last_error: Exception | None = None
    for attempt in range(1, policy.max_attempts + 1):
        try:
            return gateway.complete(request)
        except (ProviderError, GatewayTimeout) as exc:
            if not _is_retryable(exc) or attempt == policy.max_attempts:
                raise
            last_error = exc
            delay = policy.base_delay * policy.multiplier ** (attempt - 1)
            sleep(delay * (1.0 + rng.random() * policy.jitter))
    raise last_error  # unreachable; loop either returned or raised
