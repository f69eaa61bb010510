"""Prediction traces, accuracy/confusion computation, and report files.

A run persists as two files: ``<run>.header.json`` (config echo, rendered
summary, accuracy, confusion matrix) and ``<run>.records.jsonl`` with one
prediction record per line, appendable while a run is still in flight.
``load_report(persist_report(r)) == r`` on every field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

__all__ = [
    "FAILED_LABEL",
    "SCHEMA_VERSION",
    "TestRow",
    "PredictionRecord",
    "RunReport",
    "ReportError",
    "NoRecords",
    "SchemaVersionMismatch",
    "ReportParseError",
    "compute_accuracy",
    "format_percent",
    "confusion_matrix",
    "persist_report",
    "load_report",
]

SCHEMA_VERSION = 1

# Reserved predicted label for rows whose prediction step never produced a
# valid label; keeps such rows countable in the confusion matrix.
FAILED_LABEL = "<failed>"


class ReportError(Exception):
    pass


class NoRecords(ReportError):
    def __init__(self) -> None:
        super().__init__("no prediction records")


class SchemaVersionMismatch(ReportError):
    def __init__(self, found: object) -> None:
        super().__init__(f"unsupported report schema version {found!r}, expected {SCHEMA_VERSION}")


class ReportParseError(ReportError):
    def __init__(self, path: Path, line_no: int, detail: str) -> None:
        super().__init__(f"{path}, line {line_no}: {detail}")


@dataclass(frozen=True)
class TestRow:
    values: dict[str, str]  # feature column -> cell text
    label: str  # ground truth

    __test__ = False  # not a pytest class, despite the name


@dataclass(frozen=True)
class PredictionRecord:
    test_row: TestRow
    generated_query: str
    retrieval_attempts: int
    retrieved_row_indices: list[int]
    retrieval_failed: bool
    predicted_label: str
    reason: str
    correct: bool
    timings: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.correct != (self.predicted_label == self.test_row.label):
            raise ValueError("correct flag contradicts predicted vs ground-truth label")
        if self.retrieval_failed and self.retrieved_row_indices:
            raise ValueError("retrieval_failed implies no retrieved rows")

    def to_json(self) -> dict:
        return {
            "test_row": {"values": dict(self.test_row.values), "label": self.test_row.label},
            "generated_query": self.generated_query,
            "retrieval_attempts": self.retrieval_attempts,
            "retrieved_row_indices": list(self.retrieved_row_indices),
            "retrieval_failed": self.retrieval_failed,
            "predicted_label": self.predicted_label,
            "reason": self.reason,
            "correct": self.correct,
            "timings": dict(self.timings),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "PredictionRecord":
        return cls(
            test_row=TestRow(
                values=dict(payload["test_row"]["values"]), label=payload["test_row"]["label"]
            ),
            generated_query=payload["generated_query"],
            retrieval_attempts=payload["retrieval_attempts"],
            retrieved_row_indices=list(payload["retrieved_row_indices"]),
            retrieval_failed=payload["retrieval_failed"],
            predicted_label=payload["predicted_label"],
            reason=payload["reason"],
            correct=payload["correct"],
            timings=dict(payload["timings"]),
        )


def compute_accuracy(records) -> Fraction:
    """Exact correct/total fraction over the records."""
    records = list(records)
    if not records:
        raise NoRecords()
    correct = sum(1 for r in records if r.correct)
    return Fraction(correct, len(records))


def format_percent(fraction: Fraction) -> str:
    """Whole-percent presentation, rounding halves up ('97%')."""
    return f"{int(fraction * 100 + Fraction(1, 2))}%"


def confusion_matrix(records) -> dict[str, dict[str, int]]:
    """(truth -> predicted -> count) over the union of labels seen."""
    records = list(records)
    if not records:
        raise NoRecords()
    labels: list[str] = []
    for record in records:
        if record.test_row.label not in labels:
            labels.append(record.test_row.label)
    for record in records:
        if record.predicted_label not in labels:
            labels.append(record.predicted_label)
    matrix = {truth: {pred: 0 for pred in labels} for truth in labels}
    for record in records:
        matrix[record.test_row.label][record.predicted_label] += 1
    return matrix


@dataclass(frozen=True)
class RunReport:
    dataset_name: str
    config: dict
    summary_text: str
    records: tuple[PredictionRecord, ...]
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )

    @property
    def accuracy(self) -> Fraction:
        return compute_accuracy(self.records)

    @property
    def correct_count(self) -> int:
        return sum(1 for r in self.records if r.correct)

    @property
    def confusion(self) -> dict[str, dict[str, int]]:
        return confusion_matrix(self.records)


def _paths(base: Path) -> tuple[Path, Path]:
    return base.with_name(base.name + ".header.json"), base.with_name(
        base.name + ".records.jsonl"
    )


def persist_report(report: RunReport, base: Path) -> tuple[Path, Path]:
    """Write ``<base>.header.json`` and ``<base>.records.jsonl``."""
    header_path, records_path = _paths(base)
    header = {
        "schema_version": SCHEMA_VERSION,
        "dataset": report.dataset_name,
        "created_at": report.created_at,
        "config": report.config,
        "summary": report.summary_text,
        "record_count": len(report.records),
        "correct_count": report.correct_count,
        "accuracy": float(report.accuracy),
        "accuracy_percent": format_percent(report.accuracy),
        "confusion": report.confusion,
    }
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header_path.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
    with records_path.open("w", encoding="utf-8") as fh:
        for record in report.records:
            fh.write(json.dumps(record.to_json()) + "\n")
    return header_path, records_path


def load_report(base: Path) -> RunReport:
    """Reconstruct a report from its two files, validating the schema."""
    header_path, records_path = _paths(base)
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ReportParseError(header_path, exc.lineno, exc.msg) from exc
    if header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(header.get("schema_version"))
    records: list[PredictionRecord] = []
    with records_path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(PredictionRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ReportParseError(records_path, line_no, str(exc)) from exc
    if len(records) != header.get("record_count"):
        raise ReportParseError(
            records_path,
            len(records),
            f"expected {header.get('record_count')} records, found {len(records)}",
        )
    return RunReport(
        dataset_name=header["dataset"],
        config=header["config"],
        summary_text=header["summary"],
        records=tuple(records),
        created_at=header["created_at"],
    )
