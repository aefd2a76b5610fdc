"""Report rendering.

Markdown is the canonical output and is byte-deterministic. HTML is produced by
converting that Markdown, and PDF by laying out that HTML with reportlab, so all
three carry the same rows and metadata.

Table cells escape ``\\``, ``|`` and ``<`` with a backslash and encode newlines
as ``<br>``, which keeps the Markdown-to-HTML step lossless for cell text.
"""

from __future__ import annotations

import enum
import functools
import html
import io
from dataclasses import dataclass
from html.parser import HTMLParser

from checksupport.checklist import ChecklistTemplate
from checksupport.errors import RenderFailed, TemplateMismatch
from checksupport.pipeline import CompletedChecklist, ItemStatus, Recommendation
from checksupport.prompts import NULL_SENTINEL

ANSWERED_MARKER = "Answered"
COLUMNS = ("Item", "Checklist text", "Response", "Status")


class ReportFormat(enum.Enum):
    MARKDOWN = "md"
    HTML = "html"
    PDF = "pdf"


@dataclass(frozen=True)
class ReportRow:
    item_id: str
    item_text: str
    status: str
    answer: str


@dataclass(frozen=True)
class ReportDocument:
    title: str
    metadata: tuple[tuple[str, str], ...]
    sections: tuple[tuple[str, tuple[ReportRow, ...]], ...]

    @property
    def rows(self) -> list[ReportRow]:
        return [row for _, rows in self.sections for row in rows]


def build_document(completed: CompletedChecklist, template: ChecklistTemplate) -> ReportDocument:
    if completed.template_name != template.name:
        raise TemplateMismatch(
            f"responses are for {completed.template_name!r}, template is {template.name!r}"
        )
    keys = [item.key for item in template.items]
    got = [r.item_id for r in completed.responses]
    if keys != got:
        raise TemplateMismatch(f"response ids {got!r} do not match template items {keys!r}")

    responses = {r.item_id: r for r in completed.responses}
    sections = []
    for section in template.sections:
        rows = []
        for item in section.items:
            r = responses[item.key]
            marker = NULL_SENTINEL if r.status is ItemStatus.NOT_REPORTED else ANSWERED_MARKER
            rows.append(ReportRow(item.id, item.text, marker, r.answer))
        sections.append((section.title, tuple(rows)))

    p = completed.provenance
    metadata = [("Template", template.name)]
    if template.version:
        metadata.append(("Template version", template.version))
    if p.source_name:
        metadata.append(("Manuscript", p.source_name))
    metadata += [
        ("Model", p.model),
        ("Backend", p.backend),
        ("Seed", "none" if p.seed is None else str(p.seed)),
        ("Started", p.started_at),
        ("Finished", p.finished_at),
        ("Prompt versions", ", ".join(p.prompt_versions[k] for k in sorted(p.prompt_versions))),
    ]
    return ReportDocument(f"{template.name} checklist report", tuple(metadata), tuple(sections))


# -- markdown ------------------------------------------------------------------------


def escape_cell(text: str) -> str:
    out = text.replace("\\", "\\\\").replace("|", "\\|").replace("<", "\\<")
    return out.replace("\r\n", "\n").replace("\n", "<br>")


def unescape_cell(cell: str) -> str:
    out, i = [], 0
    while i < len(cell):
        ch = cell[i]
        if ch == "\\" and i + 1 < len(cell):
            out.append(cell[i + 1])
            i += 2
        elif cell.startswith("<br>", i):
            out.append("\n")
            i += 4
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def split_row(line: str) -> list[str]:
    """Split a ``| a | b |`` table line on unescaped pipes, returning raw cells."""
    body = line.strip()
    if body.startswith("|"):
        body = body[1:]
    cells, current, i = [], [], 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            current.append(body[i : i + 2])
            i += 2
            continue
        if ch == "|":
            cells.append("".join(current))
            current = []
        else:
            current.append(ch)
        i += 1
    if "".join(current).strip():
        cells.append("".join(current))
    # cells are written as "| x |"; drop exactly the single padding space on each side
    return [c[1:] if c.startswith(" ") else c for c in (c[:-1] if c.endswith(" ") else c for c in cells)]


def _md_row(cells) -> str:
    return "| " + " | ".join(cells) + " |"


def to_markdown(doc: ReportDocument) -> str:
    lines = [f"# {doc.title}", ""]
    lines += [f"- {key}: {value}" for key, value in doc.metadata]
    for title, rows in doc.sections:
        lines += ["", f"## {title}", "", _md_row(COLUMNS), _md_row(["---"] * len(COLUMNS))]
        for row in rows:
            lines.append(
                _md_row([escape_cell(row.item_id), escape_cell(row.item_text), escape_cell(row.answer), row.status])
            )
    return "\n".join(lines) + "\n"


# -- html ------------------------------------------------------------------------------

_HTML_HEAD = """<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>
body {{ font-family: sans-serif; margin: 2em; }}
table {{ border-collapse: collapse; width: 100%; margin-bottom: 1.5em; }}
th, td {{ border: 1px solid #999; padding: 4px 6px; vertical-align: top; text-align: left; }}
</style>
</head>
<body>"""


def _cell_html(raw: str) -> str:
    return html.escape(unescape_cell(raw), quote=False).replace("\n", "<br>")


def markdown_to_html(markdown: str) -> str:
    """Convert the report Markdown subset (headings, bullets, pipe tables, paragraphs)."""
    lines = markdown.split("\n")
    title = next((l[2:] for l in lines if l.startswith("# ")), "Report")
    out = [_HTML_HEAD.format(title=html.escape(title, quote=False))]
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith("## "):
            out.append(f"<h2>{html.escape(line[3:], quote=False)}</h2>")
        elif line.startswith("# "):
            out.append(f"<h1>{html.escape(line[2:], quote=False)}</h1>")
        elif line.startswith("- "):
            out.append("<ul>")
            while i < len(lines) and lines[i].startswith("- "):
                out.append(f"<li>{html.escape(lines[i][2:], quote=False)}</li>")
                i += 1
            out.append("</ul>")
            continue
        elif line.startswith("|"):
            block = []
            while i < len(lines) and lines[i].startswith("|"):
                block.append(lines[i])
                i += 1
            out.append("<table>")
            out.append("<tr>" + "".join(f"<th>{_cell_html(c)}</th>" for c in split_row(block[0])) + "</tr>")
            for row in block[2:]:
                out.append("<tr>" + "".join(f"<td>{_cell_html(c)}</td>" for c in split_row(row)) + "</tr>")
            out.append("</table>")
            continue
        elif line.strip():
            out.append(f"<p>{html.escape(line, quote=False)}</p>")
        i += 1
    out.append("</body>\n</html>\n")
    return "\n".join(out)


class _BlockReader(HTMLParser):
    """Reads the HTML produced by :func:`markdown_to_html` back into blocks.

    Produces ``("h1"|"h2"|"li"|"p", text)`` and ``("table", [[cell, ...], ...])``.
    """

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.blocks: list = []
        self._text: list[str] | None = None
        self._tag = None
        self._rows: list | None = None
        self._in_title = False

    def handle_starttag(self, tag, attrs):
        if tag == "title":
            self._in_title = True
        elif tag in ("h1", "h2", "li", "p", "td", "th"):
            self._tag, self._text = tag, []
        elif tag == "table":
            self._rows = []
        elif tag == "tr" and self._rows is not None:
            self._rows.append([])
        elif tag == "br" and self._text is not None:
            self._text.append("\n")

    def handle_endtag(self, tag):
        if tag == "title":
            self._in_title = False
        elif tag in ("td", "th") and self._text is not None:
            self._rows[-1].append("".join(self._text))
            self._text = None
        elif tag in ("h1", "h2", "li", "p") and self._text is not None:
            self.blocks.append((tag, "".join(self._text)))
            self._text = None
        elif tag == "table":
            self.blocks.append(("table", self._rows))
            self._rows = None

    def handle_data(self, data):
        if self._text is not None and not self._in_title:
            self._text.append(data)


def html_blocks(document: str) -> list:
    reader = _BlockReader()
    reader.feed(document)
    reader.close()
    return reader.blocks


# -- pdf -------------------------------------------------------------------------------


def _para_markup(text: str) -> str:
    return html.escape(text, quote=False).replace("\n", "<br/>")


def html_to_pdf(document: str) -> bytes:
    from reportlab.lib import colors
    from reportlab.lib.pagesizes import A4
    from reportlab.lib.styles import getSampleStyleSheet
    from reportlab.lib.units import mm
    from reportlab.pdfgen.canvas import Canvas
    from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

    styles = getSampleStyleSheet()
    cell_style = styles["BodyText"].clone("Cell", fontSize=8.5, leading=10.5)
    story = []
    for kind, content in html_blocks(document):
        if kind == "h1":
            story.append(Paragraph(_para_markup(content), styles["Title"]))
        elif kind == "h2":
            story += [Spacer(1, 4 * mm), Paragraph(_para_markup(content), styles["Heading2"])]
        elif kind == "li":
            story.append(Paragraph("&bull; " + _para_markup(content), styles["Normal"]))
        elif kind == "p":
            story.append(Paragraph(_para_markup(content), styles["Normal"]))
        elif kind == "table":
            data = [[Paragraph(_para_markup(c), cell_style) for c in row] for row in content]
            table = Table(data, colWidths=[12 * mm, 58 * mm, 74 * mm, 30 * mm], repeatRows=1)
            table.setStyle(
                TableStyle(
                    [
                        ("GRID", (0, 0), (-1, -1), 0.5, colors.grey),
                        ("BACKGROUND", (0, 0), (-1, 0), colors.whitesmoke),
                        ("VALIGN", (0, 0), (-1, -1), "TOP"),
                    ]
                )
            )
            story.append(table)

    buf = io.BytesIO()
    canvas = functools.partial(Canvas, pdfVersion=(1, 7))
    try:
        SimpleDocTemplate(
            buf, pagesize=A4, leftMargin=18 * mm, rightMargin=18 * mm, topMargin=18 * mm, bottomMargin=18 * mm,
            invariant=1,
        ).build(story, canvasmaker=canvas)
    except Exception as exc:
        raise RenderFailed(f"PDF rendering failed: {exc}") from exc
    return buf.getvalue()


def render(completed: CompletedChecklist, template: ChecklistTemplate, fmt: ReportFormat) -> bytes:
    markdown = to_markdown(build_document(completed, template))
    if fmt is ReportFormat.MARKDOWN:
        return markdown.encode("utf-8")
    document = markdown_to_html(markdown)
    if fmt is ReportFormat.HTML:
        return document.encode("utf-8")
    return html_to_pdf(document)


def emit_recommendation(rec: Recommendation) -> str:
    return f"{rec.chosen}\n"


def report_filename(manuscript_stem: str, template_name: str, fmt: ReportFormat) -> str:
    return f"{manuscript_stem}.{template_name}.report.{fmt.value}"
