"""Versioned prompt templates for the planning and coding stages.

System prompts and few-shot examples live as plain UTF-8 Markdown (and
one Python script) in a templates directory so they can be edited and
reviewed without touching code. A packaged default set ships inside the
distribution; deployments may point at their own directory.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import TemplateInvalid, TemplateMissing

PLAN_SYSTEM_FILE = "plan_system.md"
CODE_SYSTEM_FILE = "code_system.md"
_PLAN_EXAMPLE_INPUT = re.compile(r"plan_example_(\d+)_input\.md\Z")
_CODE_EXAMPLE_INPUT = re.compile(r"code_example_(\d+)_input\.md\Z")


@dataclass(frozen=True)
class TemplateSet:
    """Loaded prompt fixtures for both LLM stages.

    Examples are (input, expected output) pairs in filename order.
    """

    plan_system: str
    plan_examples: tuple[tuple[str, str], ...]
    code_system: str
    code_examples: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if not self.plan_system.strip():
            raise TemplateInvalid(f"{PLAN_SYSTEM_FILE} is empty")
        if not self.code_system.strip():
            raise TemplateInvalid(f"{CODE_SYSTEM_FILE} is empty")
        if not self.plan_examples:
            raise TemplateMissing("no plan few-shot examples found")
        if not self.code_examples:
            raise TemplateMissing("no code few-shot examples found")
        for pair in self.plan_examples + self.code_examples:
            if not pair[0].strip() or not pair[1].strip():
                raise TemplateInvalid("few-shot example file is empty")

    @property
    def plan_digest(self) -> str:
        return _digest(self.plan_system, self.plan_examples)

    @property
    def code_digest(self) -> str:
        return _digest(self.code_system, self.code_examples)

    @classmethod
    def load(cls, directory: Path | None = None) -> "TemplateSet":
        """Load templates from a directory, or the packaged defaults."""
        root = Path(directory) if directory is not None else None
        if root is not None and not root.is_dir():
            raise TemplateMissing(f"template directory not found: {root}")
        tree = root if root is not None else resources.files(__package__) / "templates"
        entries = {entry.name: entry for entry in tree.iterdir() if entry.is_file()}

        def read(name: str) -> str:
            if name not in entries:
                raise TemplateMissing(f"template file not found: {name}")
            return entries[name].read_text(encoding="utf-8")

        return cls(
            plan_system=read(PLAN_SYSTEM_FILE),
            plan_examples=_load_examples(entries, read, _PLAN_EXAMPLE_INPUT),
            code_system=read(CODE_SYSTEM_FILE),
            code_examples=_load_examples(entries, read, _CODE_EXAMPLE_INPUT),
        )


def _load_examples(entries, read, input_pattern) -> tuple[tuple[str, str], ...]:
    pairs = []
    for name in sorted(entries):
        match = input_pattern.fullmatch(name)
        if not match:
            continue
        output_names = [
            name[: -len("_input.md")] + suffix
            for suffix in ("_output.md", "_output.py")
        ]
        found = [n for n in output_names if n in entries]
        if not found:
            raise TemplateInvalid(f"example {name} has no matching output file")
        pairs.append((read(name), read(found[0])))
    return tuple(pairs)


def _digest(system: str, examples: tuple[tuple[str, str], ...]) -> str:
    blob = json.dumps(
        {"system": system, "examples": [list(p) for p in examples]},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
