from __future__ import annotations

import json
import random
from fractions import Fraction

import pytest

from lmldap.reporting import (
    FAILED_LABEL,
    NoRecords,
    PredictionRecord,
    ReportParseError,
    RunReport,
    SchemaVersionMismatch,
    TestRow,
    compute_accuracy,
    confusion_matrix,
    format_percent,
    load_report,
    persist_report,
)


def record(truth: str, predicted: str, **kwargs) -> PredictionRecord:
    defaults = dict(
        test_row=TestRow(values={"x": "1.0"}, label=truth),
        generated_query="x >= 0",
        retrieval_attempts=1,
        retrieved_row_indices=[0, 1],
        retrieval_failed=False,
        predicted_label=predicted,
        reason="because",
        correct=truth == predicted,
        timings={"predict_seconds": 0.01},
    )
    defaults.update(kwargs)
    return PredictionRecord(**defaults)


def test_accuracy_29_of_30_reports_97():
    records = [record("a", "a")] * 29 + [record("a", "b")]
    accuracy = compute_accuracy(records)
    assert accuracy == Fraction(29, 30)
    assert format_percent(accuracy) == "97%"


def test_accuracy_all_correct():
    accuracy = compute_accuracy([record("a", "a")] * 5)
    assert accuracy == 1
    assert format_percent(accuracy) == "100%"


def test_accuracy_7_of_20_reports_35():
    records = [record("a", "a")] * 7 + [record("a", "b")] * 13
    accuracy = compute_accuracy(records)
    assert accuracy == Fraction(7, 20)
    assert format_percent(accuracy) == "35%"


def test_percent_rounds_half_up():
    assert format_percent(Fraction(1, 8)) == "13%"  # 12.5 -> 13
    assert format_percent(Fraction(0)) == "0%"


def test_accuracy_requires_records():
    with pytest.raises(NoRecords):
        compute_accuracy([])


def test_record_invariants_enforced():
    with pytest.raises(ValueError):
        record("a", "b", correct=True)
    with pytest.raises(ValueError):
        record("a", "a", retrieval_failed=True)  # failed but indices non-empty


def test_confusion_all_correct_diagonal():
    records = (
        [record("a", "a")] * 10 + [record("b", "b")] * 10 + [record("c", "c")] * 10
    )
    matrix = confusion_matrix(records)
    assert matrix["a"]["a"] == 10
    assert matrix["b"]["b"] == 10
    assert matrix["c"]["c"] == 10
    assert matrix["a"]["b"] == 0


def test_confusion_off_diagonal():
    records = [record("versicolor", "versicolor")] * 9 + [record("versicolor", "virginica")]
    matrix = confusion_matrix(records)
    assert matrix["versicolor"]["versicolor"] == 9
    assert matrix["versicolor"]["virginica"] == 1


def test_confusion_includes_failed_column():
    records = [
        record("a", "a"),
        record("a", FAILED_LABEL, correct=False, retrieved_row_indices=[], retrieval_failed=True),
    ]
    matrix = confusion_matrix(records)
    assert matrix["a"][FAILED_LABEL] == 1


def test_confusion_row_sums():
    rng = random.Random(3)
    records = [
        record(rng.choice("abc"), rng.choice("abc"))
        for _ in range(50)
    ]
    matrix = confusion_matrix(records)
    for truth in matrix:
        expected = sum(1 for r in records if r.test_row.label == truth)
        assert sum(matrix[truth].values()) == expected


def random_report(rng: random.Random) -> RunReport:
    labels = ["a", "b", "c"]
    records = []
    for _ in range(rng.randint(1, 12)):
        truth = rng.choice(labels)
        predicted = rng.choice(labels + [FAILED_LABEL])
        failed = rng.random() < 0.2
        records.append(
            PredictionRecord(
                test_row=TestRow(
                    values={"x": repr(rng.uniform(0, 5)), "c": rng.choice("uvw")},
                    label=truth,
                ),
                generated_query=f"x >= {rng.random():.3f}",
                retrieval_attempts=rng.randint(1, 3),
                retrieved_row_indices=[] if failed else sorted(rng.sample(range(50), 4)),
                retrieval_failed=failed,
                predicted_label=predicted,
                reason="r" * rng.randint(0, 5),
                correct=truth == predicted,
                timings={"predict_seconds": rng.random()},
            )
        )
    return RunReport(
        dataset_name="random",
        config={"rng_seed": rng.randint(0, 99), "test_fraction": 0.2},
        summary_text="Label (label),x,Num rows,Comments\na,0.0-1.0 (avg: 0.5),3,\n",
        records=tuple(records),
    )


def test_persist_load_round_trip(tmp_path):
    rng = random.Random(17)
    for i in range(25):
        report = random_report(rng)
        base = tmp_path / f"run{i}"
        persist_report(report, base)
        assert load_report(base) == report


def test_persisted_files_exist_and_are_jsonl(tmp_path):
    report = random_report(random.Random(1))
    header_path, records_path = persist_report(report, tmp_path / "demo")
    assert header_path.name == "demo.header.json"
    assert records_path.name == "demo.records.jsonl"
    lines = records_path.read_text().splitlines()
    assert len(lines) == len(report.records)
    for line in lines:
        json.loads(line)
    header = json.loads(header_path.read_text())
    assert header["schema_version"] == 1
    assert header["record_count"] == len(report.records)


def test_truncated_last_line_reports_line_number(tmp_path):
    report = random_report(random.Random(2))
    _, records_path = persist_report(report, tmp_path / "demo")
    lines = records_path.read_text().splitlines()
    records_path.write_text("\n".join(lines[:-1] + [lines[-1][: len(lines[-1]) // 2]]) + "\n")
    with pytest.raises(ReportParseError) as err:
        load_report(tmp_path / "demo")
    assert f"line {len(lines)}" in str(err.value)


def test_future_schema_version_rejected(tmp_path):
    report = random_report(random.Random(3))
    header_path, _ = persist_report(report, tmp_path / "demo")
    header = json.loads(header_path.read_text())
    header["schema_version"] = 999
    header_path.write_text(json.dumps(header))
    with pytest.raises(SchemaVersionMismatch):
        load_report(tmp_path / "demo")


def test_accuracy_times_count_is_exact(tmp_path):
    rng = random.Random(5)
    for _ in range(20):
        report = random_report(rng)
        correct = sum(1 for r in report.records if r.correct)
        assert report.accuracy * len(report.records) == correct
