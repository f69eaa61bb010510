"""Per-label pattern tables: the summary artifact the pipeline builds.

A pattern summary has one row per label; each feature column holds either
a numeric range rendered ``min-max (avg: x)`` or a category list rendered
``a, b, c``, plus a ``Num rows`` count and free-text ``Comments``.

``parse_pattern_table`` accepts the formats model responses arrive in:
CSV (the merge prompt's convention), pipe-delimited tables, or tab
separation; separator rows of dashes are ignored. ``render_pattern_table``
emits the canonical CSV form with averages at two decimals.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from typing import Union

from .table import render_csv_row

__all__ = [
    "NumericRange",
    "CategorySet",
    "FeaturePattern",
    "LabelPattern",
    "PatternSummary",
    "PatternTableError",
    "MissingColumn",
    "DuplicateLabel",
    "UnknownLabel",
    "MalformedCell",
    "parse_pattern_table",
    "render_pattern_table",
    "format_number",
]

_NUM = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
# "min-max (avg: x)", tolerant of whitespace and of a bare "(x)" average.
_RANGE_RE = re.compile(
    rf"^\s*(?P<min>{_NUM})\s*-\s*(?P<max>{_NUM})\s*\(\s*(?:avg:?\s*)?(?P<avg>{_NUM})\s*\)\s*$"
)
_INT_RE = re.compile(r"^\s*\d+\s*$")
_LABEL_HEADER_RE = re.compile(r"^label(\s*\((?P<name>.*)\))?$", re.IGNORECASE)
_DASH_CELL_RE = re.compile(r"^[-: ]*$")


class PatternTableError(Exception):
    pass


class MissingColumn(PatternTableError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"pattern table is missing a {name!r} column")


class DuplicateLabel(PatternTableError):
    def __init__(self, label: str) -> None:
        self.label = label
        super().__init__(f"more than one row for label {label!r}")


class UnknownLabel(PatternTableError):
    def __init__(self, label: str) -> None:
        self.label = label
        super().__init__(f"label {label!r} is not one of the expected labels")


class MalformedCell(PatternTableError):
    def __init__(self, row: int, column: str, detail: str) -> None:
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column!r}: {detail}")


@dataclass(frozen=True)
class NumericRange:
    min: float
    max: float
    avg: float
    # Samples behind avg; carried in memory so merges weight means exactly,
    # not rendered (parsed tables fall back to Num rows weighting).
    count: int | None = None


@dataclass(frozen=True)
class CategorySet:
    values: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("CategorySet must be non-empty")


FeaturePattern = Union[NumericRange, CategorySet]


@dataclass(frozen=True)
class LabelPattern:
    label: str
    patterns: dict[str, FeaturePattern]  # column -> pattern, schema order
    num_rows: int
    comments: str = ""


@dataclass(frozen=True)
class PatternSummary:
    label_column: str
    rows: tuple[LabelPattern, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(r.label for r in self.rows)

    @property
    def feature_columns(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for row in self.rows:
            for name in row.patterns:
                seen.setdefault(name)
        return tuple(seen)

    def row_for(self, label: str) -> LabelPattern:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)


def format_number(x: float) -> str:
    """Shortest exact decimal form of *x* ('5.0', '0.24', '1e+30')."""
    return repr(float(x))


def _format_avg(x: float) -> str:
    return repr(round(float(x), 2))


def _render_pattern(pattern: FeaturePattern | None) -> str:
    if pattern is None:
        return ""
    if isinstance(pattern, NumericRange):
        return (
            f"{format_number(pattern.min)}-{format_number(pattern.max)}"
            f" (avg: {_format_avg(pattern.avg)})"
        )
    return ", ".join(pattern.values)


def render_pattern_table(summary: PatternSummary) -> str:
    """Canonical CSV text: label, feature patterns, Num rows, Comments."""
    columns = summary.feature_columns
    parts = [
        render_csv_row([f"Label ({summary.label_column})", *columns, "Num rows", "Comments"])
    ]
    for row in summary.rows:
        cells = [_render_pattern(row.patterns.get(c)) for c in columns]
        parts.append(render_csv_row([row.label, *cells, str(row.num_rows), row.comments]))
    return "".join(parts)


def _split_rows(text: str) -> list[list[str]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if any("|" in ln for ln in lines):
        rows = []
        for ln in lines:
            cells = [c.strip() for c in ln.strip().strip("|").split("|")]
            rows.append(cells)
        return rows
    if any("\t" in ln for ln in lines):
        return [[c.strip() for c in ln.split("\t")] for ln in lines]
    return [[c.strip() for c in rec] for rec in csv.reader(io.StringIO("\n".join(lines)))]


def _is_separator_row(cells: list[str]) -> bool:
    return all(_DASH_CELL_RE.match(c) for c in cells)


def _parse_cell(text: str, row_no: int, column: str) -> FeaturePattern | None:
    if text.strip() == "":
        return None
    m = _RANGE_RE.match(text)
    if m:
        return NumericRange(
            min=float(m.group("min")), max=float(m.group("max")), avg=float(m.group("avg"))
        )
    values = tuple(v.strip() for v in text.split(",") if v.strip())
    if not values:
        raise MalformedCell(row_no, column, f"cannot interpret cell {text!r}")
    return CategorySet(values)


def parse_pattern_table(
    text: str,
    label_column: str | None = None,
    expected_labels: list[str] | tuple[str, ...] | None = None,
) -> PatternSummary:
    """Parse a model-produced pattern table into a :class:`PatternSummary`.

    The header must contain a label column (``Label``, ``Label (<name>)``,
    or the label column's own name) and a ``Num rows`` column; ``Comments``
    is filled with the empty string when absent. Labels outside
    *expected_labels*, duplicated labels, and uninterpretable cells are
    rejected. With *label_column* None the name is recovered from a
    ``Label (<name>)`` header; with *expected_labels* None any label is
    accepted.
    """
    rows = [r for r in _split_rows(text) if not _is_separator_row(r)]
    if not rows:
        raise MissingColumn("Label")
    header = rows[0]
    label_idx = num_rows_idx = comments_idx = None
    feature_idx: dict[str, int] = {}
    for i, name in enumerate(header):
        folded = name.strip().lower()
        header_match = _LABEL_HEADER_RE.match(name.strip())
        if label_idx is None and (
            header_match or (label_column is not None and name.strip() == label_column)
        ):
            label_idx = i
            if label_column is None and header_match and header_match.group("name"):
                label_column = header_match.group("name").strip()
        elif folded in ("num rows", "num_rows"):
            num_rows_idx = i
        elif folded == "comments":
            comments_idx = i
        else:
            feature_idx[name.strip()] = i
    if label_idx is None:
        raise MissingColumn("Label")
    if num_rows_idx is None:
        raise MissingColumn("Num rows")
    if label_column is None:
        label_column = "label"

    parsed: list[LabelPattern] = []
    seen: set[str] = set()
    expected = None if expected_labels is None else set(expected_labels)
    for row_no, cells in enumerate(rows[1:], start=1):
        if len(cells) < len(header):
            cells = cells + [""] * (len(header) - len(cells))
        label = cells[label_idx].strip()
        if expected is not None and label not in expected:
            raise UnknownLabel(label)
        if label in seen:
            raise DuplicateLabel(label)
        seen.add(label)
        patterns: dict[str, FeaturePattern] = {}
        for column, idx in feature_idx.items():
            pattern = _parse_cell(cells[idx], row_no, column)
            if pattern is not None:
                patterns[column] = pattern
        raw_count = cells[num_rows_idx]
        if not _INT_RE.match(raw_count):
            raise MalformedCell(row_no, "Num rows", f"not a row count: {raw_count!r}")
        comments = cells[comments_idx].strip() if comments_idx is not None else ""
        parsed.append(
            LabelPattern(
                label=label, patterns=patterns, num_rows=int(raw_count), comments=comments
            )
        )
    return PatternSummary(label_column=label_column, rows=tuple(parsed))
