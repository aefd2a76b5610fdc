"""Manuscript text extraction, normalization, truncation and windowing."""

from __future__ import annotations

import enum
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from checksupport.errors import (
    DocumentNotFound,
    EmptyDocument,
    ExtractionFailed,
    InvalidWindowParams,
    UnsupportedFormat,
)

logger = logging.getLogger(__name__)


class DocFormat(enum.Enum):
    PDF = "pdf"
    DOCX = "docx"
    PLAIN = "plain"


_EXTENSIONS = {
    ".pdf": DocFormat.PDF,
    ".docx": DocFormat.DOCX,
    ".txt": DocFormat.PLAIN,
    ".text": DocFormat.PLAIN,
}


@dataclass(frozen=True)
class SourceDocument:
    path: Path
    format: DocFormat
    size_bytes: int

    @classmethod
    def from_path(cls, path) -> "SourceDocument":
        path = Path(path)
        if not path.is_file():
            raise DocumentNotFound(f"no such file: {path}")
        fmt = detect_format(path)
        return cls(path=path, format=fmt, size_bytes=path.stat().st_size)


@dataclass(frozen=True)
class NormalizedText:
    content: str
    source: SourceDocument | None = None
    char_count: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "char_count", len(self.content))

    @classmethod
    def from_string(cls, raw: str, source: SourceDocument | None = None) -> "NormalizedText":
        return cls(normalize(raw), source)


@dataclass(frozen=True)
class TextWindow:
    index: int
    start: int
    end: int
    content: str


def detect_format(path) -> DocFormat:
    """Map a file extension (case-insensitive) to a document format."""
    name = str(path)
    if not name:
        raise UnsupportedFormat("empty path")
    suffix = Path(name).suffix.lower()
    try:
        return _EXTENSIONS[suffix]
    except KeyError:
        raise UnsupportedFormat(f"unsupported file type {suffix or '(none)'!r}: {name}") from None


_SPACE_RUN = re.compile(r" {2,}")
_NEWLINE_RUN = re.compile(r"\n{3,}")


def _is_dropped_control(ch: str) -> bool:
    return ch != "\n" and unicodedata.category(ch) == "Cc"


def normalize(raw: str) -> str:
    """Clean extracted text into the canonical form the pipeline consumes.

    Line endings become ``\\n``, tabs become spaces, other control characters
    are dropped, space runs collapse to one and blank-line runs to a single
    blank line. The result is stripped and the function is idempotent.
    """
    text = raw.replace("\r\n", "\n").replace("\r", "\n").replace("\t", " ")
    text = "".join(ch for ch in text if not _is_dropped_control(ch))
    text = _SPACE_RUN.sub(" ", text)
    text = _NEWLINE_RUN.sub("\n\n", text)
    return text.strip()


def backoff_prefix(text: str, limit: int) -> str:
    """Longest prefix of at most ``limit`` chars that ends on a whitespace boundary."""
    if limit < 0:
        raise ValueError("limit must be non-negative")
    if len(text) <= limit:
        return text
    for cut in range(limit, 0, -1):
        if text[cut].isspace():
            return text[:cut].rstrip()
    return text[:limit]


def head_excerpt(text: NormalizedText, limit: int) -> str:
    return backoff_prefix(text.content, limit)


def windows(text: NormalizedText, window_size: int, overlap: int) -> list[TextWindow]:
    """Split text into fixed-size windows that advance by ``window_size - overlap``."""
    if window_size <= 0 or not 0 <= overlap < window_size:
        raise InvalidWindowParams(
            f"need window_size > 0 and 0 <= overlap < window_size, got {window_size}/{overlap}"
        )
    content = text.content if isinstance(text, NormalizedText) else text
    n = len(content)
    step = window_size - overlap
    out: list[TextWindow] = []
    start = 0
    while start < n:
        end = min(start + window_size, n)
        out.append(TextWindow(len(out), start, end, content[start:end]))
        if end == n:
            break
        start += step
    return out


# -- extraction -------------------------------------------------------------------


def _extract_pdf(path: Path) -> str:
    from pypdf import PdfReader

    reader = PdfReader(path)
    pages = [page.extract_text() or "" for page in reader.pages]
    return "\n\n".join(pages)


def _extract_docx(path: Path) -> str:
    import docx
    from docx.table import Table

    document = docx.Document(str(path))
    blocks: list[str] = []
    for block in document.iter_inner_content():
        if isinstance(block, Table):
            # merged cells repeat in python-docx; keep each distinct cell once per row
            for row in block.rows:
                cells: list[str] = []
                seen = set()
                for cell in row.cells:
                    if id(cell._tc) in seen:
                        continue
                    seen.add(id(cell._tc))
                    cells.append(cell.text.strip())
                blocks.append(" | ".join(cells))
        else:
            blocks.append(block.text)
    return "\n".join(blocks)


def _extract_plain(path: Path) -> str:
    return path.read_bytes().decode("utf-8-sig")


_EXTRACTORS = {
    DocFormat.PDF: _extract_pdf,
    DocFormat.DOCX: _extract_docx,
    DocFormat.PLAIN: _extract_plain,
}


def extract_text(doc: SourceDocument) -> NormalizedText:
    """Run the format-specific extractor and normalize the result.

    Raises:
        EmptyDocument: the file is empty or normalizes to nothing.
        ExtractionFailed: the file is unreadable or corrupt.
    """
    if doc.size_bytes == 0:
        raise EmptyDocument(f"empty file: {doc.path}")
    try:
        raw = _EXTRACTORS[doc.format](doc.path)
    except (OSError, UnicodeDecodeError) as exc:
        raise ExtractionFailed(f"cannot read {doc.path}: {exc}") from exc
    except Exception as exc:  # pypdf / python-docx raise a zoo of types on corrupt input
        raise ExtractionFailed(f"cannot extract text from {doc.path}: {exc}") from exc
    content = normalize(raw)
    if not content:
        raise EmptyDocument(f"no text extracted from {doc.path}")
    logger.debug("extracted %d chars from %s", len(content), doc.path)
    return NormalizedText(content, doc)


def load_text(path) -> NormalizedText:
    return extract_text(SourceDocument.from_path(path))
