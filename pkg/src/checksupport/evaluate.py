"""Accuracy metrics for checklist recommendation and item completion.

Predictions and annotations are exchanged as newline-delimited JSON. Manuscript
truths carry ``manuscript_id`` and ``true_category``; manuscript predictions carry
``manuscript_id`` and ``label``. Item truths carry ``manuscript_id``, ``item_id``,
``expected_status`` (``Answered`` / ``NotReported``) and ``expected_content``;
item predictions carry ``manuscript_id``, ``item_id``, ``status`` and ``answer``.
"""

from __future__ import annotations

import enum
import json
import re
import statistics
import string
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

from checksupport.errors import MalformedRecord, MissingPrediction, NoData
from checksupport.pipeline import ItemStatus

Comparator = Callable[[str, str], bool]

ALL_ITEMS = "all"


@dataclass(frozen=True)
class ManuscriptAnnotation:
    manuscript_id: str
    true_category: str


@dataclass(frozen=True)
class ItemAnnotation:
    manuscript_id: str
    item_id: str
    expected_status: ItemStatus
    expected_content: str | None = None

    def __post_init__(self):
        if (self.expected_status is ItemStatus.ANSWERED) != (self.expected_content is not None):
            raise ValueError("expected_content is required for Answered items and forbidden otherwise")


@dataclass(frozen=True)
class ItemPrediction:
    manuscript_id: str
    item_id: str
    status: ItemStatus
    answer: str = ""


@dataclass(frozen=True)
class CategoryScore:
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total


@dataclass(frozen=True)
class MetricsReport:
    overall_accuracy: float
    per_category: dict[str, CategoryScore]
    n: int

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[tuple[str, bool]]) -> "MetricsReport":
        correct: Counter = Counter()
        total: Counter = Counter()
        for category, ok in outcomes:
            total[category] += 1
            correct[category] += bool(ok)
        n = sum(total.values())
        if n == 0:
            raise NoData("nothing to score")
        per_category = {c: CategoryScore(correct[c], total[c]) for c in sorted(total)}
        return cls(sum(correct.values()) / n, per_category, n)

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "n": self.n,
            "per_category": {
                c: {"correct": s.correct, "total": s.total, "accuracy": s.accuracy}
                for c, s in self.per_category.items()
            },
        }

    def table(self) -> str:
        lines = [f"{'category':<12} {'correct':>8} {'total':>6} {'accuracy':>9}"]
        for c, s in self.per_category.items():
            lines.append(f"{c:<12} {s.correct:>8} {s.total:>6} {s.accuracy:>9.3f}")
        lines.append(f"{'overall':<12} {sum(s.correct for s in self.per_category.values()):>8} "
                     f"{self.n:>6} {self.overall_accuracy:>9.3f}")
        return "\n".join(lines)


def manuscript_accuracy(
    predictions: Mapping[str, str], truths: Iterable[ManuscriptAnnotation]
) -> MetricsReport:
    truths = list(truths)
    if not truths:
        raise NoData("empty truth set")
    missing = [t.manuscript_id for t in truths if t.manuscript_id not in predictions]
    if missing:
        raise MissingPrediction(missing)
    return MetricsReport.from_outcomes(
        (t.true_category, predictions[t.manuscript_id] == t.true_category) for t in truths
    )


_PUNCT = str.maketrans("", "", string.punctuation)


def normalize_content(text: str) -> str:
    return re.sub(r"\s+", " ", text.lower().translate(_PUNCT)).strip()


def normalized_equal(answer: str, expected: str) -> bool:
    return normalize_content(answer) == normalize_content(expected)


def item_correct(
    prediction: ItemPrediction, truth: ItemAnnotation, comparator: Comparator = normalized_equal, strict: bool = True
) -> bool:
    """Score a single item prediction against its annotation.

    Under ``strict`` scoring a NotReported prediction is always an error, even
    when the annotation agrees that the manuscript omits the information.
    """
    if prediction.status is not truth.expected_status:
        return False
    if prediction.status is ItemStatus.NOT_REPORTED:
        return not strict
    return comparator(prediction.answer, truth.expected_content)


def item_accuracy(
    predictions: Mapping[tuple[str, str], ItemPrediction] | Iterable[ItemPrediction],
    truths: Iterable[ItemAnnotation],
    categories: Mapping[str, str] | None = None,
    comparator: Comparator = normalized_equal,
    strict: bool = True,
) -> MetricsReport:
    """Item-level accuracy, broken down by each manuscript's category label.

    Manuscripts absent from ``categories`` (or all of them when it is None) are
    reported under ``"all"``.
    """
    if not isinstance(predictions, Mapping):
        predictions = {(p.manuscript_id, p.item_id): p for p in predictions}
    truths = list(truths)
    if not truths:
        raise NoData("empty truth set")
    missing = [f"{t.manuscript_id}/{t.item_id}" for t in truths if (t.manuscript_id, t.item_id) not in predictions]
    if missing:
        raise MissingPrediction(missing)
    categories = categories or {}
    return MetricsReport.from_outcomes(
        (
            categories.get(t.manuscript_id, ALL_ITEMS),
            item_correct(predictions[(t.manuscript_id, t.item_id)], t, comparator, strict),
        )
        for t in truths
    )


class FailureMode(enum.Enum):
    AMBIGUOUS_LANGUAGE = "AmbiguousLanguage"
    INCOMPLETE_REPORTING = "IncompleteReporting"
    WINDOW_MISS = "WindowMiss"


@dataclass(frozen=True)
class FailureRecord:
    manuscript_id: str
    item_id: str
    mode: FailureMode
    note: str = ""


def tally_failures(records: Iterable[FailureRecord]) -> dict[FailureMode, int]:
    counts = Counter(r.mode for r in records)
    return {mode: counts.get(mode, 0) for mode in FailureMode}


@dataclass(frozen=True)
class RuntimeStats:
    per_manuscript_ms: tuple[float, ...]
    mean_ms: float


def runtime_stats(samples: Iterable[float]) -> RuntimeStats:
    samples = tuple(samples)
    if not samples:
        raise NoData("no runtime samples")
    return RuntimeStats(samples, statistics.fmean(samples))


# -- NDJSON io -------------------------------------------------------------------------


def read_ndjson(path) -> list[tuple[int, dict]]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except OSError as exc:
        raise MalformedRecord(path, 0, f"cannot read file: {exc}") from exc
    records = []
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except ValueError as exc:
            raise MalformedRecord(path, line_no, f"invalid JSON: {exc.args[0]}") from None
        if not isinstance(record, dict):
            raise MalformedRecord(path, line_no, "expected a JSON object")
        records.append((line_no, record))
    return records


def _field(path, line_no, record, name, kinds=(str,), optional=False):
    value = record.get(name)
    if value is None and optional:
        return None
    if not isinstance(value, kinds):
        raise MalformedRecord(path, line_no, f"field {name!r} missing or wrong type")
    return value


def _status(path, line_no, value) -> ItemStatus:
    try:
        return ItemStatus(value)
    except ValueError:
        raise MalformedRecord(path, line_no, f"unknown status {value!r}") from None


def _unique(path, keyed: list[tuple[int, tuple]], what: str):
    seen = set()
    for line_no, key in keyed:
        if key in seen:
            raise MalformedRecord(path, line_no, f"duplicate {what} {key!r}")
        seen.add(key)


def load_manuscript_truths(path) -> list[ManuscriptAnnotation]:
    out = []
    keyed = []
    for line_no, rec in read_ndjson(path):
        ann = ManuscriptAnnotation(_field(path, line_no, rec, "manuscript_id"), _field(path, line_no, rec, "true_category"))
        keyed.append((line_no, ann.manuscript_id))
        out.append(ann)
    _unique(path, keyed, "manuscript_id")
    return out


def load_manuscript_predictions(path) -> dict[str, str]:
    out = {}
    for line_no, rec in read_ndjson(path):
        mid = _field(path, line_no, rec, "manuscript_id")
        if mid in out:
            raise MalformedRecord(path, line_no, f"duplicate manuscript_id {mid!r}")
        out[mid] = _field(path, line_no, rec, "label")
    return out


def load_item_truths(path) -> list[ItemAnnotation]:
    out, keyed = [], []
    for line_no, rec in read_ndjson(path):
        status = _status(path, line_no, _field(path, line_no, rec, "expected_status"))
        try:
            ann = ItemAnnotation(
                _field(path, line_no, rec, "manuscript_id"),
                _field(path, line_no, rec, "item_id"),
                status,
                _field(path, line_no, rec, "expected_content", optional=True),
            )
        except ValueError as exc:
            raise MalformedRecord(path, line_no, str(exc)) from None
        keyed.append((line_no, (ann.manuscript_id, ann.item_id)))
        out.append(ann)
    _unique(path, keyed, "(manuscript_id, item_id)")
    return out


def load_item_predictions(path) -> dict[tuple[str, str], ItemPrediction]:
    out = {}
    for line_no, rec in read_ndjson(path):
        pred = ItemPrediction(
            _field(path, line_no, rec, "manuscript_id"),
            _field(path, line_no, rec, "item_id"),
            _status(path, line_no, _field(path, line_no, rec, "status")),
            _field(path, line_no, rec, "answer", optional=True) or "",
        )
        key = (pred.manuscript_id, pred.item_id)
        if key in out:
            raise MalformedRecord(path, line_no, f"duplicate prediction {key!r}")
        out[key] = pred
    return out


def write_ndjson(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
