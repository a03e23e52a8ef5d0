"""Input normalization: prompts, uploaded PDFs, and arXiv identifiers.

The three input modes collapse into one InputSource union. PDFs are only
inspected up to their magic header (the document body is forwarded to a
multimodal model, never parsed here) and are carried base64-encoded,
optionally DEFLATE-compressed, with a content digest for round-trip
verification.
"""

from __future__ import annotations

import base64
import binascii
import enum
import hashlib
import json
import os
import re
import zlib
from dataclasses import dataclass

import httpx

from .errors import (
    EmptyPrompt,
    EncodeFailed,
    FetchFailed,
    MalformedId,
    NotAPdf,
    NotFound,
    PdfTooLarge,
    PromptTooLong,
)

DEFAULT_MAX_PDF_BYTES = 50 * 1024 * 1024
DEFAULT_MAX_PROMPT_CHARS = 10_000
DEFAULT_ARXIV_BASE_URL = "https://arxiv.org/pdf"
ARXIV_BASE_URL_ENV = "MANIMATOR_ARXIV_BASE_URL"

PDF_MAGIC = b"%PDF-"

# New-style (2007+) identifiers: YYMM.NNNN[N] with optional version.
_NEW_STYLE = re.compile(r"\d{4}\.\d{4,5}(v\d+)?\Z")
# Old-style identifiers: archive[.SUBJECT]/YYMMNNN.
_OLD_STYLE = re.compile(r"[a-z-]+(\.[A-Z]{2})?/\d{7}\Z")


@dataclass(frozen=True)
class ArxivId:
    """A validated arXiv identifier in canonical form."""

    raw: str

    def __str__(self) -> str:
        return self.raw


def validate_arxiv_id(raw: str) -> ArxivId:
    """Canonicalize and validate an arXiv identifier.

    Strips surrounding whitespace and a leading "arXiv:" prefix
    (case-insensitive), then checks the new-style or old-style grammar.
    Idempotent on its own output.
    """
    if not isinstance(raw, str):
        raise MalformedId(f"arXiv id must be a string, got {type(raw).__name__}")
    candidate = raw.strip()
    if candidate.lower().startswith("arxiv:"):
        candidate = candidate[len("arxiv:"):].strip()
    if _NEW_STYLE.fullmatch(candidate) or _OLD_STYLE.fullmatch(candidate):
        return ArxivId(candidate)
    raise MalformedId(f"not a valid arXiv identifier: {raw!r}")


class PdfSource(enum.Enum):
    UPLOAD = "upload"
    ARXIV_FETCH = "arxiv_fetch"


@dataclass(frozen=True)
class PdfDocument:
    """Raw PDF bytes that passed the magic-header and size checks."""

    data: bytes
    source: PdfSource
    max_bytes: int = DEFAULT_MAX_PDF_BYTES

    def __post_init__(self):
        if not self.data.startswith(PDF_MAGIC):
            raise NotAPdf("body does not start with %PDF-")
        if len(self.data) > self.max_bytes:
            raise PdfTooLarge(
                f"PDF is {len(self.data)} bytes, limit is {self.max_bytes}"
            )

    @property
    def byte_length(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class EncodedPdf:
    """Base64 payload of (optionally compressed) PDF bytes.

    decode(payload), then decompress when `compressed`, must reproduce
    bytes whose SHA-256 equals `original_digest`.
    """

    payload: str
    compressed: bool
    original_digest: str
    codec: str = "deflate"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def encode_pdf(doc: PdfDocument, compress: bool) -> EncodedPdf:
    """Encode PDF bytes as base64, DEFLATE-compressing first when asked."""
    try:
        body = zlib.compress(doc.data) if compress else doc.data
        payload = base64.b64encode(body).decode("ascii")
    except zlib.error as exc:
        raise EncodeFailed(f"compression failed: {exc}") from exc
    return EncodedPdf(
        payload=payload,
        compressed=compress,
        original_digest=_sha256(doc.data),
    )


def decode_pdf(encoded: EncodedPdf) -> bytes:
    """Invert encode_pdf, verifying the content digest."""
    try:
        body = base64.b64decode(encoded.payload.encode("ascii"), validate=True)
        data = zlib.decompress(body) if encoded.compressed else body
    except (binascii.Error, ValueError, zlib.error) as exc:
        raise EncodeFailed(f"decode failed: {exc}") from exc
    if _sha256(data) != encoded.original_digest:
        raise EncodeFailed("decoded bytes do not match the recorded digest")
    return data


@dataclass(frozen=True)
class PromptInput:
    """Free-text prompt, stored trimmed."""

    text: str
    max_chars: int = DEFAULT_MAX_PROMPT_CHARS

    def __post_init__(self):
        trimmed = self.text.strip()
        if not trimmed:
            raise EmptyPrompt("prompt is empty after trimming")
        if len(trimmed) > self.max_chars:
            raise PromptTooLong(
                f"prompt is {len(trimmed)} characters, limit is {self.max_chars}"
            )
        object.__setattr__(self, "text", trimmed)


@dataclass(frozen=True)
class PdfInput:
    document: EncodedPdf


@dataclass(frozen=True)
class ArxivInput:
    arxiv_id: ArxivId
    document: EncodedPdf


InputSource = PromptInput | PdfInput | ArxivInput


def input_source_to_dict(source: InputSource) -> dict:
    if isinstance(source, PromptInput):
        return {"kind": "prompt", "text": source.text}
    if isinstance(source, PdfInput):
        return {"kind": "pdf", "document": _encoded_to_dict(source.document)}
    if isinstance(source, ArxivInput):
        return {
            "kind": "arxiv",
            "arxiv_id": source.arxiv_id.raw,
            "document": _encoded_to_dict(source.document),
        }
    raise TypeError(f"not an InputSource: {source!r}")


def input_source_from_dict(data: dict) -> InputSource:
    kind = data.get("kind")
    if kind == "prompt":
        return PromptInput(data["text"])
    if kind == "pdf":
        return PdfInput(_encoded_from_dict(data["document"]))
    if kind == "arxiv":
        return ArxivInput(ArxivId(data["arxiv_id"]), _encoded_from_dict(data["document"]))
    raise ValueError(f"unknown input kind: {kind!r}")


def canonical_input_bytes(source: InputSource) -> bytes:
    """Stable byte serialization used for cache keys."""
    return json.dumps(
        input_source_to_dict(source), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")


def _encoded_to_dict(enc: EncodedPdf) -> dict:
    return {
        "payload": enc.payload,
        "compressed": enc.compressed,
        "original_digest": enc.original_digest,
        "codec": enc.codec,
    }


def _encoded_from_dict(data: dict) -> EncodedPdf:
    return EncodedPdf(
        payload=data["payload"],
        compressed=data["compressed"],
        original_digest=data["original_digest"],
        codec=data.get("codec", "deflate"),
    )


def arxiv_base_url() -> str:
    return os.environ.get(ARXIV_BASE_URL_ENV, DEFAULT_ARXIV_BASE_URL).rstrip("/")


def make_arxiv_client(timeout: float = 30.0) -> httpx.Client:
    """HTTP client for PDF fetches: one redirect hop, shareable across jobs."""
    return httpx.Client(follow_redirects=True, max_redirects=1, timeout=timeout)


def fetch_arxiv_pdf(
    arxiv_id: ArxivId,
    client: httpx.Client,
    base_url: str | None = None,
    max_bytes: int = DEFAULT_MAX_PDF_BYTES,
) -> PdfDocument:
    """Fetch the PDF for a validated identifier.

    Raises NotFound on 404, FetchFailed on transport errors or other
    non-200 statuses, NotAPdf when the body lacks the magic header.
    Retry policy belongs to the caller.
    """
    url = f"{base_url or arxiv_base_url()}/{arxiv_id.raw}"
    try:
        response = client.get(url)
    except httpx.HTTPError as exc:
        raise FetchFailed(f"fetch failed for {url}: {exc}") from exc
    if response.status_code == 404:
        raise NotFound(f"no PDF at {url}")
    if response.status_code != 200:
        raise FetchFailed(f"unexpected status {response.status_code} for {url}")
    return PdfDocument(response.content, PdfSource.ARXIV_FETCH, max_bytes=max_bytes)
