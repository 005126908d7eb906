"""Embedded prompt template library.

Prompt wording is never typed by the operator at run time; the tool ships one
fixed template per pipeline step as a data file, and a workspace may override
a template's wording without code changes. Each template ends with a fixed
instruction to emit an "## Explanation" section so every artifact carries an
explanation alongside the output.

Template file format (``templates/<template_id>.prompt``)::

    id: data_model_sql
    placeholders: requirements
    max_context_chars: 24000
    ---
    <body with {{placeholder}} slots>

Long context values are split at blank lines that sit outside code fences,
and the render is marked truncated; the pipeline engine then executes the
chunks as sequential completions.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

from .errors import EmptyContextValue, MissingPlaceholder, UnknownTemplate

TEMPLATE_IDS: tuple[str, ...] = (
    "api_code",
    "consolidate_requirements",
    "data_model_sql",
    "layer_requirements",
    "orm_objects",
    "per_file_requirements",
    "repair_syntax",
    "reverse_requirements",
    "test_cases",
    "ui_code",
)

DEFAULT_MAX_CONTEXT_CHARS = 24_000


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    required_placeholders: frozenset[str]
    max_context_chars: int


@dataclass(frozen=True)
class RenderedPrompt:
    """A fully substituted prompt, possibly split for chunked execution.

    ``chunks`` holds the prompt texts to execute in order; ``text`` is the
    first (and, unless truncated, only) chunk. ``context_chars`` is the
    largest single context value inserted into any one chunk, so it never
    exceeds the template's bound.
    """

    template_id: str
    text: str
    context_chars: int
    truncated: bool
    chunks: tuple[str, ...]


def parse_template_file(text: str, source: str = "<memory>") -> PromptTemplate:
    """Parse the metadata-block-plus-body template format."""
    lines = text.splitlines()
    meta: dict[str, str] = {}
    body_start = None
    for i, line in enumerate(lines):
        if line.strip() == "---":
            body_start = i + 1
            break
        if ":" in line:
            key, _, value = line.partition(":")
            meta[key.strip()] = value.strip()
    if body_start is None:
        raise ValueError(f"{source}: missing '---' separator")
    template_id = meta.get("id", "")
    if not template_id:
        raise ValueError(f"{source}: missing 'id:' field")
    placeholders = frozenset(
        p.strip() for p in meta.get("placeholders", "").split(",") if p.strip()
    )
    max_chars = int(meta.get("max_context_chars", DEFAULT_MAX_CONTEXT_CHARS))
    body = "\n".join(lines[body_start:])
    used = _placeholders_in(body)
    undeclared = used - placeholders
    if undeclared:
        raise ValueError(f"{source}: undeclared placeholders {sorted(undeclared)}")
    return PromptTemplate(
        template_id=template_id,
        body=body,
        required_placeholders=placeholders,
        max_context_chars=max_chars,
    )


def _placeholders_in(body: str) -> set[str]:
    found = set()
    pos = 0
    while True:
        start = body.find("{{", pos)
        if start < 0:
            break
        end = body.find("}}", start)
        if end < 0:
            break
        found.add(body[start + 2 : end].strip())
        pos = end + 2
    return found


def split_for_context(value: str, limit: int) -> list[str]:
    """Split a long value at blank lines outside code fences, packed greedily.

    A single block longer than the limit (e.g. one huge fenced listing) is
    hard-sliced so every returned piece respects the bound.
    """
    blocks: list[str] = []
    current: list[str] = []
    in_fence = False
    for line in value.splitlines():
        if line.lstrip().startswith("```"):
            in_fence = not in_fence
        if not in_fence and not line.strip():
            if current:
                blocks.append("\n".join(current))
                current = []
            continue
        current.append(line)
    if current:
        blocks.append("\n".join(current))

    pieces: list[str] = []
    acc = ""
    for block in blocks:
        while len(block) > limit:
            if acc:
                pieces.append(acc)
                acc = ""
            pieces.append(block[:limit])
            block = block[limit:]
        if not block:
            continue
        candidate = f"{acc}\n\n{block}" if acc else block
        if len(candidate) > limit:
            pieces.append(acc)
            acc = block
        else:
            acc = candidate
    if acc:
        pieces.append(acc)
    return pieces or [""]


class PromptLibrary:
    """The fixed template set, with optional per-workspace wording overrides."""

    def __init__(self, override_dir: Optional[Path] = None):
        self._templates: dict[str, PromptTemplate] = {}
        base = resources.files("modernkit") / "templates"
        for template_id in TEMPLATE_IDS:
            text = (base / f"{template_id}.prompt").read_text(encoding="utf-8")
            self._templates[template_id] = parse_template_file(text, template_id)
        if override_dir is not None:
            self._apply_overrides(Path(override_dir))

    def _apply_overrides(self, directory: Path) -> None:
        if not directory.is_dir():
            return
        for path in sorted(directory.glob("*.prompt")):
            tmpl = parse_template_file(path.read_text(encoding="utf-8"), str(path))
            if tmpl.template_id in self._templates:
                self._templates[tmpl.template_id] = tmpl

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplate(f"no template with id {template_id!r}") from None

    def list_templates(self) -> list[PromptTemplate]:
        """All templates, sorted by template_id."""
        return [self._templates[tid] for tid in sorted(self._templates)]

    def render(self, template_id: str, context: Mapping[str, str]) -> RenderedPrompt:
        """Substitute every placeholder; split oversized values for chunking.

        Rendering is deterministic: the same template and context always
        produce byte-identical prompt text.
        """
        tmpl = self.get(template_id)
        values: dict[str, str] = {}
        for name in sorted(tmpl.required_placeholders):
            if name not in context:
                raise MissingPlaceholder(name)
            value = context[name]
            if not value:
                raise EmptyContextValue(name)
            values[name] = value

        limit = tmpl.max_context_chars
        oversized = {n: split_for_context(v, limit) for n, v in values.items() if len(v) > limit}
        if not oversized:
            text = _substitute(tmpl.body, values)
            context_chars = max((len(v) for v in values.values()), default=0)
            return RenderedPrompt(template_id, text, context_chars, False, (text,))

        n_chunks = max(len(p) for p in oversized.values())
        chunks: list[str] = []
        context_chars = 0
        for i in range(n_chunks):
            chunk_values = dict(values)
            for name, pieces in oversized.items():
                chunk_values[name] = pieces[i] if i < len(pieces) else ""
            context_chars = max(
                context_chars, max(len(v) for v in chunk_values.values())
            )
            chunks.append(_substitute(tmpl.body, chunk_values))
        return RenderedPrompt(template_id, chunks[0], context_chars, True, tuple(chunks))


def _substitute(body: str, values: Mapping[str, str]) -> str:
    text = body
    for name, value in values.items():
        text = text.replace("{{" + name + "}}", value)
    return text
