import json

import pytest
from hypothesis import given, strategies as st

from checksupport import evaluate
from checksupport.errors import MalformedRecord, MissingPrediction, NoData
from checksupport.evaluate import (
    FailureMode,
    FailureRecord,
    ItemAnnotation,
    ItemPrediction,
    ManuscriptAnnotation,
    MetricsReport,
    item_accuracy,
    item_correct,
    manuscript_accuracy,
    normalized_equal,
    runtime_stats,
    tally_failures,
)
from checksupport.pipeline import ItemStatus

A, NR = ItemStatus.ANSWERED, ItemStatus.NOT_REPORTED


def test_manuscript_accuracy_counts(fixtures_dir):
    truths = evaluate.load_manuscript_truths(fixtures_dir / "eval" / "manuscript_truth.ndjson")
    preds = evaluate.load_manuscript_predictions(fixtures_dir / "eval" / "manuscript_predictions.ndjson")
    report = manuscript_accuracy(preds, truths)
    assert report.n == 100
    assert {c: (s.correct, s.total) for c, s in report.per_category.items()} == {
        "A": (26, 30), "B": (40, 40), "NA": (24, 30)
    }


def test_perfect_predictions():
    truths = [ManuscriptAnnotation(f"m{i}", c) for i, c in enumerate("ABAB")]
    report = manuscript_accuracy({t.manuscript_id: t.true_category for t in truths}, truths)
    assert report.overall_accuracy == 1.0
    assert all(s.accuracy == 1.0 for s in report.per_category.values())


def test_empty_inputs():
    with pytest.raises(NoData):
        manuscript_accuracy({}, [])
    with pytest.raises(NoData):
        item_accuracy({}, [])
    with pytest.raises(NoData):
        runtime_stats([])


def test_missing_prediction_lists_ids():
    truths = [ManuscriptAnnotation("b", "A"), ManuscriptAnnotation("a", "A")]
    with pytest.raises(MissingPrediction) as info:
        manuscript_accuracy({}, truths)
    assert "a, b" in str(info.value)


def test_table_layout():
    report = MetricsReport.from_outcomes([("A", True), ("A", False), ("B", True)])
    lines = report.table().split("\n")
    assert lines[0].split() == ["category", "correct", "total", "accuracy"]
    assert lines[1].split() == ["A", "1", "2", "0.500"]
    assert lines[-1].split() == ["overall", "2", "3", "0.667"]
    assert json.loads(json.dumps(report.to_dict()))["per_category"]["B"]["accuracy"] == 1.0


outcomes = st.lists(st.tuples(st.sampled_from("ABC"), st.booleans()), min_size=1, max_size=60)


@given(outcomes)
def test_overall_is_weighted_mean(data):
    report = MetricsReport.from_outcomes(data)
    weighted = sum(s.accuracy * s.total for s in report.per_category.values()) / report.n
    assert report.overall_accuracy == pytest.approx(weighted)
    assert 0.0 <= report.overall_accuracy <= 1.0
    assert sum(s.total for s in report.per_category.values()) == len(data)


@given(outcomes, st.randoms())
def test_permutation_invariance(data, rnd):
    shuffled = list(data)
    rnd.shuffle(shuffled)
    assert MetricsReport.from_outcomes(shuffled) == MetricsReport.from_outcomes(data)


@given(outcomes, st.data())
def test_flipping_a_wrong_prediction_never_lowers_accuracy(data, draw):
    wrong = [i for i, (_, ok) in enumerate(data) if not ok]
    if not wrong:
        return
    i = draw.draw(st.sampled_from(wrong))
    fixed = list(data)
    fixed[i] = (fixed[i][0], True)
    before, after = MetricsReport.from_outcomes(data), MetricsReport.from_outcomes(fixed)
    assert after.overall_accuracy > before.overall_accuracy
    assert after.per_category[data[i][0]].accuracy > before.per_category[data[i][0]].accuracy


@pytest.mark.parametrize(
    "answer, expected, same",
    [
        ("Sample size was 120 patients.", "sample size was 120 patients", True),
        ("Blocks of four;  six", "blocks of four six", True),
        ("120 patients", "121 patients", False),
    ],
)
def test_normalized_comparator(answer, expected, same):
    assert normalized_equal(answer, expected) is same


@pytest.mark.parametrize(
    "pred, truth, strict, ok",
    [
        ((A, "yes"), (A, "Yes."), True, True),
        ((A, "yes"), (A, "no"), True, False),
        ((NR, ""), (A, "yes"), True, False),
        ((A, "yes"), (NR, None), True, False),
        ((NR, ""), (NR, None), True, False),
        ((NR, ""), (NR, None), False, True),
        ((NR, ""), (A, "yes"), False, False),
    ],
)
def test_item_correct(pred, truth, strict, ok):
    p = ItemPrediction("m", "1", *pred)
    t = ItemAnnotation("m", "1", *truth)
    assert item_correct(p, t, strict=strict) is ok


def test_custom_comparator():
    p = ItemPrediction("m", "1", A, "a longer answer with 120 patients")
    t = ItemAnnotation("m", "1", A, "120 patients")
    assert not item_correct(p, t)
    assert item_correct(p, t, comparator=lambda got, want: want in got)


def test_annotation_invariant():
    with pytest.raises(ValueError):
        ItemAnnotation("m", "1", A, None)
    with pytest.raises(ValueError):
        ItemAnnotation("m", "1", NR, "text")


def test_item_accuracy_without_categories():
    truths = [ItemAnnotation("m", "1", A, "x"), ItemAnnotation("m", "2", A, "y")]
    preds = [ItemPrediction("m", "1", A, "x"), ItemPrediction("m", "2", A, "z")]
    report = item_accuracy(preds, truths)
    assert list(report.per_category) == ["all"]
    assert report.overall_accuracy == 0.5
    with pytest.raises(MissingPrediction):
        item_accuracy(preds[:1], truths)


def test_tally_and_runtime():
    records = [
        FailureRecord("m", "1", FailureMode.WINDOW_MISS),
        FailureRecord("m", "2", FailureMode.WINDOW_MISS),
        FailureRecord("m", "3", FailureMode.AMBIGUOUS_LANGUAGE),
    ]
    assert tally_failures(records) == {
        FailureMode.AMBIGUOUS_LANGUAGE: 1,
        FailureMode.INCOMPLETE_REPORTING: 0,
        FailureMode.WINDOW_MISS: 2,
    }
    stats = runtime_stats([10.0, 15.0])
    assert stats.mean_ms == 12.5 and stats.per_manuscript_ms == (10.0, 15.0)


# -- NDJSON -------------------------------------------------------------------------------


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_malformed_line_number(tmp_path):
    path = write(tmp_path, "t.ndjson", '{"manuscript_id": "a", "true_category": "A"}\n\n{oops\n')
    with pytest.raises(MalformedRecord) as info:
        evaluate.load_manuscript_truths(path)
    assert info.value.line_no == 3
    assert ":3:" in str(info.value)


@pytest.mark.parametrize(
    "line",
    [
        "[1, 2]",
        '{"manuscript_id": "a"}',
        '{"manuscript_id": 3, "true_category": "A"}',
    ],
)
def test_malformed_records(tmp_path, line):
    with pytest.raises(MalformedRecord):
        evaluate.load_manuscript_truths(write(tmp_path, "t.ndjson", line + "\n"))


def test_item_loader_checks(tmp_path):
    bad_status = write(tmp_path, "s.ndjson", '{"manuscript_id": "m", "item_id": "1", "status": "Maybe"}\n')
    with pytest.raises(MalformedRecord):
        evaluate.load_item_predictions(bad_status)
    bad_truth = write(tmp_path, "t.ndjson", '{"manuscript_id": "m", "item_id": "1", "expected_status": "Answered"}\n')
    with pytest.raises(MalformedRecord):
        evaluate.load_item_truths(bad_truth)
    dup = write(
        tmp_path, "d.ndjson",
        '{"manuscript_id": "m", "label": "A"}\n{"manuscript_id": "m", "label": "B"}\n',
    )
    with pytest.raises(MalformedRecord) as info:
        evaluate.load_manuscript_predictions(dup)
    assert info.value.line_no == 2


def test_ndjson_round_trip(tmp_path):
    records = [{"manuscript_id": "m", "item_id": "1", "status": "NotReported"}]
    evaluate.write_ndjson(tmp_path / "p.ndjson", records)
    [pred] = evaluate.load_item_predictions(tmp_path / "p.ndjson").values()
    assert pred == ItemPrediction("m", "1", NR, "")
