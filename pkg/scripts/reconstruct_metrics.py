"""Build synthetic annotation/prediction sets and score them.

The category sizes are one construction consistent with the headline numbers
(recommendation: A 26/30, B 40/40, NA 24/30; completion: A 24/30 items,
B 42/45 items). They are not the real study counts, which were never published.

    python scripts/reconstruct_metrics.py --write tests/fixtures/eval
"""

from __future__ import annotations

import argparse
from pathlib import Path

from checksupport import evaluate

WRONG_LABEL = {"A": ["B", "NA"], "B": ["A", "NA"], "NA": ["A", "B"]}


def manuscript_records(sizes=(("A", 30, 26), ("B", 40, 40), ("NA", 30, 24))):
    truths, preds = [], []
    for category, total, correct in sizes:
        for i in range(total):
            mid = f"{category}{i + 1:02d}"
            truths.append({"manuscript_id": mid, "true_category": category})
            label = category if i < correct else WRONG_LABEL[category][i % 2]
            preds.append({"manuscript_id": mid, "label": label})
    return truths, preds


# (expected_status, expected_content, predicted status, predicted answer)
_CORRECT = [
    ("Answered", "Sample size was 120 patients.", "Answered", "sample size was 120 patients"),
    ("Answered", "Blocks of four and six, stratified by hospital", "Answered", "Blocks of four and six; stratified by hospital."),
    ("Answered", "Outcome assessors were blinded.", "Answered", "Outcome assessors were blinded."),
]
_WRONG = [
    ("Answered", "Outcome assessors were blinded.", "Answered", "Patients were blinded."),
    ("Answered", "Registered at ISRCTN12345678.", "NotReported", ""),
    ("NotReported", None, "Answered", "The trial was registered."),
    ("NotReported", None, "NotReported", ""),  # wrong only under strict scoring
]


def item_records(layout=(("A", 3, 10, 24), ("B", 3, 15, 42))):
    """``layout`` rows are (category, manuscripts, items per manuscript, correct items)."""
    truths, preds = [], []
    for category, n_manuscripts, per_manuscript, correct in layout:
        k = 0
        for m in range(n_manuscripts):
            mid = f"{category}{m + 1:02d}"
            for j in range(per_manuscript):
                exp_status, exp_content, status, answer = (
                    _CORRECT[k % len(_CORRECT)] if k < correct else _WRONG[(k - correct) % len(_WRONG)]
                )
                item_id = str(j + 1)
                truth = {"manuscript_id": mid, "item_id": item_id, "expected_status": exp_status}
                if exp_content is not None:
                    truth["expected_content"] = exp_content
                truths.append(truth)
                preds.append({"manuscript_id": mid, "item_id": item_id, "status": status, "answer": answer})
                k += 1
    return truths, preds


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--write", type=Path, help="directory to write the NDJSON files into")
    args = parser.parse_args()

    m_truth, m_pred = manuscript_records()
    i_truth, i_pred = item_records()
    if args.write:
        args.write.mkdir(parents=True, exist_ok=True)
        evaluate.write_ndjson(args.write / "manuscript_truth.ndjson", m_truth)
        evaluate.write_ndjson(args.write / "manuscript_predictions.ndjson", m_pred)
        evaluate.write_ndjson(args.write / "item_truth.ndjson", i_truth)
        evaluate.write_ndjson(args.write / "item_predictions.ndjson", i_pred)
        evaluate.write_ndjson(
            args.write / "item_categories.ndjson",
            [{"manuscript_id": f"{c}{m:02d}", "true_category": c} for c in ("A", "B") for m in (1, 2, 3)],
        )
        print(f"wrote synthetic sets to {args.write}")

    rec = evaluate.manuscript_accuracy(
        {p["manuscript_id"]: p["label"] for p in m_pred},
        [evaluate.ManuscriptAnnotation(**t) for t in m_truth],
    )
    print("checklist recommendation")
    print(rec.table())

    categories = {t["manuscript_id"]: t["manuscript_id"].rstrip("0123456789") for t in i_truth}
    preds = [
        evaluate.ItemPrediction(p["manuscript_id"], p["item_id"], evaluate.ItemStatus(p["status"]), p["answer"])
        for p in i_pred
    ]
    truths = [
        evaluate.ItemAnnotation(
            t["manuscript_id"], t["item_id"], evaluate.ItemStatus(t["expected_status"]), t.get("expected_content")
        )
        for t in i_truth
    ]
    for strict in (True, False):
        print(f"\nitem completion ({'strict' if strict else 'lenient'})")
        print(evaluate.item_accuracy(preds, truths, categories, strict=strict).table())


if __name__ == "__main__":
    main()
