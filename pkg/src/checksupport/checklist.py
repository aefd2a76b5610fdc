"""Hierarchical checklist structures and a heuristic parser for checklist documents.

Line classification, applied to each stripped line in order:

* ``# Title`` (any number of ``#``) starts a section;
* ``12.`` / ``2a)`` followed by text is an item;
* ``Section 3:`` / ``Section 3.`` starts a section titled by the whole line;
* a line of at least three characters with no lowercase letters starts a section.

Everything else is prose. Prose between a heading and its first item becomes the
section's ``guidance_hint``; prose after an item becomes that item's instructions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from checksupport.errors import (
    DuplicateItemId,
    InvalidTemplate,
    NoItemsFound,
    TemplateNotFound,
)
from checksupport.text_ingest import NormalizedText, load_text

IMPLICIT_SECTION = "General"

_MD_HEADING = re.compile(r"^#+\s+(\S.*)$")
_ITEM = re.compile(r"^(\d+[a-z]?)[.)]\s+(\S.*)$")
_SECTION_WORD = re.compile(r"^Section \d+[:.]")


@dataclass(frozen=True)
class ChecklistItem:
    id: str
    text: str
    instructions: str | None = None
    # unique across the template; equals ``id`` unless the id repeats in another section
    key: str = ""

    def __post_init__(self):
        if not self.id or not self.text:
            raise InvalidTemplate("checklist items need a non-empty id and text")
        if not self.key:
            object.__setattr__(self, "key", self.id)


@dataclass(frozen=True)
class ChecklistSection:
    title: str
    index: int
    items: tuple[ChecklistItem, ...]
    guidance_hint: str | None = None

    def __post_init__(self):
        if not self.items:
            raise InvalidTemplate(f"section {self.title!r} has no items")


@dataclass(frozen=True)
class ChecklistTemplate:
    name: str
    sections: tuple[ChecklistSection, ...]
    version: str | None = None

    def __post_init__(self):
        if not self.name:
            raise InvalidTemplate("template name must be non-empty")
        if not self.sections:
            raise InvalidTemplate(f"template {self.name!r} has no sections")
        for i, section in enumerate(self.sections):
            if section.index != i:
                raise InvalidTemplate(f"section {section.title!r} has index {section.index}, expected {i}")
        keys = [item.key for item in self.items]
        if len(set(keys)) != len(keys):
            raise DuplicateItemId(f"duplicate item keys in template {self.name!r}")

    @property
    def items(self) -> list[ChecklistItem]:
        return [item for section in self.sections for item in section.items]

    def section_of(self, key: str) -> ChecklistSection:
        for section in self.sections:
            if any(item.key == key for item in section.items):
                return section
        raise KeyError(key)

    def structure(self) -> list:
        """Plain nested representation used for structural comparisons."""
        return [
            (s.title, s.guidance_hint, [(i.id, i.text, i.instructions) for i in s.items])
            for s in self.sections
        ]


def classify_line(line: str) -> tuple[str, ...]:
    """Return ``("heading", title)``, ``("item", id, text)``, ``("blank",)`` or ``("prose", line)``."""
    line = line.strip()
    if not line:
        return ("blank",)
    if m := _MD_HEADING.match(line):
        return ("heading", m.group(1).strip())
    if m := _ITEM.match(line):
        return ("item", m.group(1), m.group(2).strip())
    if _SECTION_WORD.match(line):
        return ("heading", line)
    if len(line) >= 3 and line.isupper():
        return ("heading", line)
    return ("prose", line)


@dataclass
class _Draft:
    title: str
    hint: list[str] = field(default_factory=list)
    items: list[list] = field(default_factory=list)  # [id, text, instruction lines]


def _join(lines: list[str]) -> str | None:
    return "\n".join(lines) if lines else None


def parse_checklist(text: NormalizedText | str, name: str) -> ChecklistTemplate:
    """Parse a checklist document into a template.

    Headings without items are dropped. Items before the first heading go into an
    implicit "General" section. An id repeated within one section raises
    DuplicateItemId; an id repeated across sections gets a section-qualified key.
    """
    content = text.content if isinstance(text, NormalizedText) else text
    drafts: list[_Draft] = []
    current: _Draft | None = None
    preamble: list[str] = []

    for raw in content.split("\n"):
        kind, *parts = classify_line(raw)
        if kind == "blank":
            continue
        if kind == "heading":
            current = _Draft(parts[0])
            drafts.append(current)
        elif kind == "item":
            if current is None:
                current = _Draft(IMPLICIT_SECTION, hint=preamble)
                drafts.append(current)
            current.items.append([parts[0], parts[1], []])
        elif current is None:
            preamble.append(parts[0])
        elif current.items:
            current.items[-1][2].append(parts[0])
        else:
            current.hint.append(parts[0])

    drafts = [d for d in drafts if d.items]
    if not drafts:
        raise NoItemsFound(f"no numbered items found in checklist {name!r}")

    id_sections: dict[str, set[int]] = {}
    for s_idx, draft in enumerate(drafts):
        seen = set()
        for item_id, _, _ in draft.items:
            if item_id in seen:
                raise DuplicateItemId(f"item {item_id!r} appears twice in section {draft.title!r}")
            seen.add(item_id)
            id_sections.setdefault(item_id, set()).add(s_idx)

    sections = []
    for s_idx, draft in enumerate(drafts):
        items = tuple(
            ChecklistItem(
                id=item_id,
                text=item_text,
                instructions=_join(instr),
                key=item_id if len(id_sections[item_id]) == 1 else f"{s_idx}:{item_id}",
            )
            for item_id, item_text, instr in draft.items
        )
        sections.append(ChecklistSection(draft.title, s_idx, items, _join(draft.hint)))
    return ChecklistTemplate(name=name, sections=tuple(sections))


def canonical_serialize(template: ChecklistTemplate) -> str:
    """Deterministic markdown-like form that parses back to the same structure."""
    lines: list[str] = []
    for section in template.sections:
        if lines:
            lines.append("")
        lines.append(f"# {section.title}")
        if section.guidance_hint:
            lines.extend(section.guidance_hint.split("\n"))
        for item in section.items:
            lines.append(f"{item.id}. {item.text}")
            if item.instructions:
                lines.extend("  " + line for line in item.instructions.split("\n"))
    return "\n".join(lines) + "\n"


# -- template registry ------------------------------------------------------------

_TEMPLATE_SUFFIXES = (".md", ".txt", ".text", ".pdf", ".docx")


def _builtin_files() -> dict:
    root = resources.files("checksupport") / "templates"
    return {
        entry.name[: -len(".md")]: entry
        for entry in root.iterdir()
        if entry.name.endswith(".md")
    }


def builtin_names() -> list[str]:
    return sorted(_builtin_files())


def builtin_manifest() -> dict:
    root = resources.files("checksupport") / "templates"
    return json.loads((root / "manifest.json").read_text(encoding="utf-8"))


def load_builtin(name: str) -> ChecklistTemplate:
    files = _builtin_files()
    if name not in files:
        raise TemplateNotFound(f"unknown builtin checklist {name!r}; available: {', '.join(sorted(files))}")
    raw = files[name].read_text(encoding="utf-8")
    template = parse_checklist(NormalizedText.from_string(raw), name)
    version = builtin_manifest().get(name, {}).get("version")
    return ChecklistTemplate(name=template.name, sections=template.sections, version=version)


def user_templates(templates_dir) -> dict[str, Path]:
    """Checklist files in ``templates_dir`` keyed by file stem."""
    directory = Path(templates_dir)
    if not directory.is_dir():
        raise TemplateNotFound(f"templates directory not found: {directory}")
    return {
        p.stem: p
        for p in sorted(directory.iterdir())
        if p.is_file() and p.suffix.lower() in _TEMPLATE_SUFFIXES
    }


def load_file(path) -> ChecklistTemplate:
    path = Path(path)
    return parse_checklist(load_text(path), path.stem)


def available_names(templates_dir=None) -> list[str]:
    names = set(builtin_names())
    if templates_dir is not None:
        names.update(user_templates(templates_dir))
    return sorted(names)


def resolve(name_or_path: str, templates_dir=None) -> ChecklistTemplate:
    """Resolve a checklist by user template name, builtin name, or file path, in that order."""
    if templates_dir is not None:
        user = user_templates(templates_dir)
        if name_or_path in user:
            return load_file(user[name_or_path])
    if name_or_path in _builtin_files():
        return load_builtin(name_or_path)
    path = Path(name_or_path)
    if path.is_file():
        return load_file(path)
    raise TemplateNotFound(f"{name_or_path!r} is neither a known checklist nor an existing file")
