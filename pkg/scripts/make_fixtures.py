"""Regenerate the binary test fixtures and their frozen reference outputs.

Writes into tests/fixtures/:

  manuscript.pdf / manuscript.docx     rendered from manuscript.txt
  manuscript.pdf.expected.txt          reference text extraction of the PDF
  manuscript.docx.expected.txt         reference text extraction of the DOCX
  consort_golden.report.md             golden report from the scripted run

Run only when a fixture deliberately changes, then review the diff by hand.
"""

from __future__ import annotations

import argparse
import html
import io
import os
import zipfile
from datetime import datetime, timezone
from pathlib import Path

import docx
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate

from checksupport import cli
from checksupport.text_ingest import load_text

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
GOLDEN_EPOCH = "1767225600"


def paragraphs(text: str) -> list[str]:
    return [p.strip() for p in text.split("\n\n") if p.strip()]


def write_pdf(source: Path, target: Path) -> None:
    styles = getSampleStyleSheet()
    story = []
    for i, para in enumerate(paragraphs(source.read_text(encoding="utf-8"))):
        style = styles["Title"] if i == 0 else styles["BodyText"]
        story.append(Paragraph(html.escape(para).replace("\n", "<br/>"), style))

    SimpleDocTemplate(str(target), pagesize=A4, invariant=1).build(story)


def write_docx(source: Path, target: Path) -> None:
    document = docx.Document()
    for para in paragraphs(source.read_text(encoding="utf-8")):
        document.add_paragraph(para)
    table = document.add_table(rows=3, cols=3)
    for r, row in enumerate([("Group", "Randomised", "Analysed"), ("Early", "60", "57"), ("Usual care", "60", "57")]):
        for c, value in enumerate(row):
            table.cell(r, c).text = value
    document.add_paragraph("Table 1 summarises participant flow.")
    stamp = datetime(2026, 1, 1, tzinfo=timezone.utc)
    document.core_properties.created = stamp
    document.core_properties.modified = stamp
    buf = io.BytesIO()
    document.save(buf)
    # rewrite the archive with fixed entry timestamps so reruns are byte-identical
    out = io.BytesIO()
    with zipfile.ZipFile(buf) as src, zipfile.ZipFile(out, "w", zipfile.ZIP_DEFLATED) as dst:
        for info in src.infolist():
            dst.writestr(zipfile.ZipInfo(info.filename, date_time=(2026, 1, 1, 0, 0, 0)), src.read(info.filename),
                         compress_type=zipfile.ZIP_DEFLATED)
    target.write_bytes(out.getvalue())


def write_golden_report(target: Path) -> None:
    os.environ["SOURCE_DATE_EPOCH"] = GOLDEN_EPOCH
    code = cli.main([
        "complete", str(FIXTURES / "manuscript.txt"),
        "--checklist", "CONSORT-mini",
        "--backend", f"scripted:{FIXTURES / 'consort_script.json'}",
        "--model", "llama3.1",
        "--seed", "0",
        "--out", str(target),
    ])
    if code != 0:
        raise SystemExit(f"golden run failed with exit code {code}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--skip-golden", action="store_true", help="leave the golden report untouched")
    args = parser.parse_args()

    src = FIXTURES / "manuscript.txt"
    write_pdf(src, FIXTURES / "manuscript.pdf")
    write_docx(src, FIXTURES / "manuscript.docx")
    for name in ("manuscript.pdf", "manuscript.docx"):
        text = load_text(FIXTURES / name).content
        (FIXTURES / f"{name}.expected.txt").write_text(text + "\n", encoding="utf-8")
    if not args.skip_golden:
        write_golden_report(FIXTURES / "consort_golden.report.md")
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
