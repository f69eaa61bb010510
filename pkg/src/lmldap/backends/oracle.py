"""Deterministic step backend: exact statistics instead of a model.

The oracle computes per-label summaries (min/max/mean for numeric columns,
sorted distinct values for categorical ones), merges them with weighted
means, emits two-sided range queries around the test row, and predicts by
nearest summary centroid under span-normalized distance. Every step wraps
its output in the same tags the prompted backend's responses carry, so the
pipeline treats both identically.
"""

from __future__ import annotations

import csv
import io
from typing import Mapping, Sequence

from ..chunking import Chunk
from ..summary import (
    CategorySet,
    LabelPattern,
    NumericRange,
    PatternSummary,
    parse_pattern_table,
    render_pattern_table,
)
from ..table import ColumnKind, Schema, Table, load_csv_text, parse_numeric

__all__ = [
    "OracleError",
    "IncompatibleParts",
    "NoNumericColumns",
    "summarize_table",
    "oracle_summarize",
    "oracle_merge",
    "oracle_query",
    "oracle_predict",
    "OracleBackend",
    "QUERY_MAX_CHARS",
]

QUERY_MAX_CHARS = 350


class OracleError(Exception):
    pass


class IncompatibleParts(OracleError):
    def __init__(self, detail: str) -> None:
        super().__init__(f"summaries cannot be merged: {detail}")


class NoNumericColumns(OracleError):
    def __init__(self, detail: str = "the summary has no usable numeric feature column") -> None:
        super().__init__(detail)


def summarize_table(table: Table, start: int = 0, stop: int | None = None) -> PatternSummary:
    """Exact per-label pattern summary of rows [start, stop)."""
    stop = table.row_count if stop is None else stop
    label_order: list[str] = []
    members: dict[str, list[int]] = {}
    for i in range(start, stop):
        label = table.label_of(i)
        if label not in members:
            label_order.append(label)
            members[label] = []
        members[label].append(i)

    rows: list[LabelPattern] = []
    for label in label_order:
        idxs = members[label]
        patterns: dict[str, NumericRange | CategorySet] = {}
        for col in table.schema.feature_columns:
            j = table.schema.index_of(col.name)
            if col.kind is ColumnKind.NUMERIC:
                arr = table.numeric_values(col.name)
                vals = [float(arr[i]) for i in idxs if table.rows[i][j] != ""]
                if not vals:
                    continue
                patterns[col.name] = NumericRange(
                    min=min(vals),
                    max=max(vals),
                    avg=sum(vals) / len(vals),
                    count=len(vals),
                )
            else:
                distinct = sorted({table.rows[i][j] for i in idxs if table.rows[i][j] != ""})
                if not distinct:
                    continue
                patterns[col.name] = CategorySet(tuple(distinct))
        rows.append(LabelPattern(label=label, patterns=patterns, num_rows=len(idxs)))
    return PatternSummary(label_column=table.schema.label_column, rows=tuple(rows))


def oracle_summarize(chunk: Chunk) -> PatternSummary:
    return summarize_table(chunk.table, chunk.start, chunk.stop)


def oracle_merge(parts: Sequence[PatternSummary]) -> PatternSummary:
    """Combine summaries: min/max envelopes, weighted means, value unions.

    A column absent from some parts (all-missing in those chunks) merges
    over the parts that have it; a column that is numeric in one part and
    categorical in another is a real conflict and is rejected.
    """
    if not parts:
        raise IncompatibleParts("no summaries given")
    label_column = parts[0].label_column
    for part in parts[1:]:
        if part.label_column != label_column:
            raise IncompatibleParts(
                f"label columns differ: {label_column!r} vs {part.label_column!r}"
            )
    column_order_map: dict[str, None] = {}
    for part in parts:
        for name in part.feature_columns:
            column_order_map.setdefault(name)
    column_order = tuple(column_order_map)

    label_order: list[str] = []
    collected: dict[str, list[LabelPattern]] = {}
    for part in parts:
        for row in part.rows:
            if row.label not in collected:
                label_order.append(row.label)
                collected[row.label] = []
            collected[row.label].append(row)

    merged_rows: list[LabelPattern] = []
    for label in label_order:
        group = collected[label]
        patterns: dict[str, NumericRange | CategorySet] = {}
        for column in column_order:
            present = [(r.patterns[column], r.num_rows) for r in group if column in r.patterns]
            if not present:
                continue
            first = present[0][0]
            if isinstance(first, NumericRange):
                if not all(isinstance(p, NumericRange) for p, _ in present):
                    raise IncompatibleParts(f"column {column!r} mixes ranges and categories")
                ranges = [(p, n) for p, n in present]
                weights = [p.count if p.count is not None else n for p, n in ranges]
                total = sum(weights)
                patterns[column] = NumericRange(
                    min=min(p.min for p, _ in ranges),
                    max=max(p.max for p, _ in ranges),
                    avg=sum(w * p.avg for (p, _), w in zip(ranges, weights)) / total,
                    count=total if all(p.count is not None for p, _ in ranges) else None,
                )
            else:
                if not all(isinstance(p, CategorySet) for p, _ in present):
                    raise IncompatibleParts(f"column {column!r} mixes ranges and categories")
                union = sorted({v for p, _ in present for v in p.values})
                patterns[column] = CategorySet(tuple(union))
        comments = [r.comments for r in group if r.comments]
        merged_rows.append(
            LabelPattern(
                label=label,
                patterns=patterns,
                num_rows=sum(r.num_rows for r in group),
                comments="; ".join(comments),
            )
        )
    return PatternSummary(label_column=label_column, rows=tuple(merged_rows))


def _numeric_feature_columns(summary: PatternSummary) -> list[str]:
    """Columns whose patterns are numeric ranges for every label that has them."""
    out = []
    for column in summary.feature_columns:
        found = [r.patterns[column] for r in summary.rows if column in r.patterns]
        if found and all(isinstance(p, NumericRange) for p in found):
            out.append(column)
    return out


def _column_span(summary: PatternSummary, column: str) -> tuple[float, float]:
    ranges = [
        r.patterns[column]
        for r in summary.rows
        if isinstance(r.patterns.get(column), NumericRange)
    ]
    return min(p.min for p in ranges), max(p.max for p in ranges)


def _bound(x: float) -> str:
    return repr(round(x, 6))


def oracle_query(
    values: Mapping[str, str],
    summary: PatternSummary,
    schema: Schema | None = None,
    max_chars: int = QUERY_MAX_CHARS,
) -> str:
    """Two-sided range conjunction around the test row's numeric values.

    Each numeric feature contributes ``col >= v-s and col <= v+s`` with s a
    tenth of the column's global span across labels; columns are taken in
    schema order while the query stays within *max_chars*.
    """
    numeric = _numeric_feature_columns(summary)
    if schema is not None:
        order = [c.name for c in schema.feature_columns if c.name in numeric]
    else:
        order = numeric
    parts: list[str] = []
    for column in order:
        cell = values.get(column, "")
        if cell == "":
            continue
        try:
            v = parse_numeric(cell)
        except ValueError:
            continue
        lo, hi = _column_span(summary, column)
        s = (hi - lo) / 10.0
        conjunct = f"`{column}` >= {_bound(v - s)} and `{column}` <= {_bound(v + s)}"
        candidate = " and ".join([*parts, conjunct])
        if len(candidate) > max_chars:
            break
        parts.append(conjunct)
    if not parts:
        raise NoNumericColumns()
    return " and ".join(parts)


def oracle_predict(
    values: Mapping[str, str],
    summary: PatternSummary,
) -> tuple[str, str]:
    """Label whose summary means are nearest under span-normalized distance.

    Ties break toward the lexicographically smallest label. The reason text
    names the two nearest labels with their distances.
    """
    columns = []
    for column in _numeric_feature_columns(summary):
        cell = values.get(column, "")
        if cell == "":
            continue
        try:
            v = parse_numeric(cell)
        except ValueError:
            continue
        lo, hi = _column_span(summary, column)
        if hi - lo == 0:
            continue
        if not all(isinstance(r.patterns.get(column), NumericRange) for r in summary.rows):
            continue
        columns.append((column, v, hi - lo))
    if not columns:
        raise NoNumericColumns("no numeric column is usable for centroid distance")

    distances: list[tuple[float, str]] = []
    for row in summary.rows:
        d = 0.0
        for column, v, span in columns:
            pattern = row.patterns[column]
            assert isinstance(pattern, NumericRange)
            d += ((v - pattern.avg) / span) ** 2
        distances.append((d, row.label))
    distances.sort(key=lambda pair: (pair[0], pair[1]))
    best_d, best_label = distances[0]
    nearest = ", ".join(f"{label} (distance {d:.4f})" for d, label in distances[:2])
    reason = (
        f"Summary means nearest to the test row: {nearest}. "
        f"Chose {best_label} by span-normalized distance over "
        f"{len(columns)} numeric column(s)."
    )
    return best_label, reason


def _parse_single_row_csv(text: str) -> dict[str, str]:
    records = list(csv.reader(io.StringIO(text)))
    records = [r for r in records if r]
    if len(records) < 2:
        raise OracleError(f"expected a header and one data row, got {len(records)} record(s)")
    return dict(zip(records[0], records[1]))


class OracleBackend:
    """StepBackend that computes instead of prompting.

    Inputs arrive as the same rendered texts the prompted backend would
    embed in its prompts; outputs carry the same tags, so the pipeline's
    extraction and parsing paths are exercised end to end.
    """

    def __init__(self, query_max_chars: int = QUERY_MAX_CHARS) -> None:
        self.query_max_chars = query_max_chars

    def summarize_chunk(
        self, chunk_csv: str, label_column: str, labels: Sequence[str]
    ) -> str:
        table = load_csv_text(chunk_csv, label_column)
        summary = summarize_table(table)
        return "<patterns>\n" + render_pattern_table(summary) + "</patterns>"

    def merge_summaries(
        self, summaries: Sequence[str], label_column: str, labels: Sequence[str]
    ) -> str:
        parts = [parse_pattern_table(text, label_column, list(labels)) for text in summaries]
        merged = oracle_merge(parts)
        return "<patterns>\n" + render_pattern_table(merged) + "</patterns>"

    def generate_query(
        self,
        dtypes_text: str,
        summary_text: str,
        test_row_text: str,
        columns: Sequence[str],
        failed_query: str | None = None,
    ) -> str:
        summary = parse_pattern_table(summary_text)
        values = _parse_single_row_csv(test_row_text)
        query = oracle_query(values, summary, max_chars=self.query_max_chars)
        return "<dfquery>\n" + query + "\n</dfquery>"

    def predict(
        self,
        sample_rows_text: str,
        summary_text: str,
        test_row_text: str,
        labels: Sequence[str],
    ) -> str:
        summary = parse_pattern_table(summary_text, expected_labels=list(labels))
        values = _parse_single_row_csv(test_row_text)
        label, reason = oracle_predict(values, summary)
        return f"<prediction> {label} </prediction>\n<reason>\n{reason}\n</reason>"
