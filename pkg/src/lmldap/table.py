"""Immutable columnar table with CSV ingestion and deterministic rendering.

A :class:`Table` is the in-memory form of a training dataset: an ordered
schema, a designated label column, and a row-major grid of text cells.
Numeric columns additionally expose their parsed float values. Empty cells
in feature columns are treated as missing; label cells must be non-empty.
"""

from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, TextIO

import numpy as np

__all__ = [
    "ColumnKind",
    "Column",
    "Schema",
    "Table",
    "TableError",
    "EmptyInput",
    "MissingLabelColumn",
    "DuplicateColumn",
    "RaggedRow",
    "EmptyLabel",
    "OutOfRange",
    "load_csv",
    "load_csv_text",
    "render_csv_row",
    "to_csv_text",
    "class_counts",
    "is_numeric_text",
    "parse_numeric",
]

# Decimal with optional sign, fraction, and exponent. Deliberately stricter
# than float(): no inf/nan, no underscores, no surrounding whitespace.
_NUMERIC_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


class TableError(Exception):
    """Base class for table construction and rendering errors."""


class EmptyInput(TableError):
    def __init__(self) -> None:
        super().__init__("input has no header line")


class MissingLabelColumn(TableError):
    def __init__(self, label_column: str, header: Sequence[str]) -> None:
        self.label_column = label_column
        super().__init__(f"label column {label_column!r} not in header {list(header)!r}")


class DuplicateColumn(TableError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"duplicate column name {name!r}")


class RaggedRow(TableError):
    def __init__(self, line_no: int, expected: int, got: int) -> None:
        self.line_no = line_no
        super().__init__(f"line {line_no}: expected {expected} cells, got {got}")


class EmptyLabel(TableError):
    def __init__(self, row_index: int) -> None:
        self.row_index = row_index
        super().__init__(f"row {row_index}: label cell is empty")


class OutOfRange(TableError):
    def __init__(self, index: int, row_count: int) -> None:
        super().__init__(f"row index {index} out of range for table of {row_count} rows")


class ColumnKind(enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"

    def __str__(self) -> str:
        return self.value


def is_numeric_text(cell: str) -> bool:
    """True if *cell* is a plain decimal number (sign/fraction/exponent)."""
    return _NUMERIC_RE.match(cell) is not None


def parse_numeric(cell: str) -> float:
    return float(cell)


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]
    label_column: str

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        for name in names:
            if names.count(name) > 1:
                raise DuplicateColumn(name)
        if self.label_column not in names:
            raise MissingLabelColumn(self.label_column, names)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def feature_columns(self) -> tuple[Column, ...]:
        return tuple(c for c in self.columns if c.name != self.label_column)

    def kind_of(self, name: str) -> ColumnKind:
        for col in self.columns:
            if col.name == name:
                return col.kind
        raise KeyError(name)

    def index_of(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True)
class Table:
    """Immutable rows of text cells plus their inferred schema.

    Safe to share across threads: nothing mutates after construction and
    the cached numeric views are derived values.
    """

    schema: Schema
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        width = len(self.schema.columns)
        label_idx = self.schema.index_of(self.schema.label_column)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise RaggedRow(i + 2, width, len(row))
            if row[label_idx] == "":
                raise EmptyLabel(i)

    @classmethod
    def from_cells(
        cls, header: Sequence[str], rows: Iterable[Sequence[str]], label_column: str
    ) -> "Table":
        """Build a table, inferring each column's kind from its cells.

        A column is numeric when it has at least one non-empty cell and
        every non-empty cell parses as a decimal number; the label column
        is always categorical.
        """
        grid = tuple(tuple(row) for row in rows)
        kinds = []
        for j, name in enumerate(header):
            cells = [row[j] for row in grid if j < len(row) and row[j] != ""]
            numeric = bool(cells) and all(is_numeric_text(c) for c in cells)
            if name == label_column:
                numeric = False
            kinds.append(ColumnKind.NUMERIC if numeric else ColumnKind.CATEGORICAL)
        schema = Schema(
            columns=tuple(Column(n, k) for n, k in zip(header, kinds)),
            label_column=label_column,
        )
        return cls(schema=schema, rows=grid)

    @property
    def row_count(self) -> int:
        return len(self.rows)

    @cached_property
    def _label_index(self) -> int:
        return self.schema.index_of(self.schema.label_column)

    def label_of(self, row_index: int) -> str:
        return self.rows[row_index][self._label_index]

    def column_texts(self, name: str) -> tuple[str, ...]:
        j = self.schema.index_of(name)
        return tuple(row[j] for row in self.rows)

    @cached_property
    def _numeric_columns(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for col in self.schema.columns:
            if col.kind is ColumnKind.NUMERIC:
                j = self.schema.index_of(col.name)
                out[col.name] = np.array(
                    [parse_numeric(r[j]) if r[j] != "" else np.nan for r in self.rows],
                    dtype=np.float64,
                )
        return out

    def numeric_values(self, name: str) -> np.ndarray:
        """Float values of a numeric column, NaN where the cell is missing."""
        return self._numeric_columns[name]


def load_csv(source: TextIO, label_column: str) -> Table:
    """Parse an RFC-4180-style CSV stream into a :class:`Table`.

    The first record is the header. Quoted fields may contain commas and
    newlines; doubled quotes escape a quote character.
    """
    reader = csv.reader(source)
    header: list[str] | None = None
    rows: list[tuple[str, ...]] = []
    for record in reader:
        if header is None:
            if not record:
                continue
            header = record
            continue
        if not record:
            continue
        if len(record) != len(header):
            raise RaggedRow(reader.line_num, len(header), len(record))
        rows.append(tuple(record))
    if header is None:
        raise EmptyInput()
    return Table.from_cells(header, rows, label_column)


def load_csv_text(text: str, label_column: str) -> Table:
    return load_csv(io.StringIO(text), label_column)


def _render_cell(cell: str) -> str:
    if any(ch in cell for ch in ',"\n\r'):
        return '"' + cell.replace('"', '""') + '"'
    return cell


def render_csv_row(cells: Sequence[str]) -> str:
    """One RFC-4180 record: cells containing , \" or a newline are quoted."""
    return ",".join(_render_cell(c) for c in cells) + "\n"


def to_csv_text(table: Table, rows: Sequence[int] | range | None = None) -> str:
    """Render the header plus the selected rows as deterministic CSV text.

    Cells containing a comma, quote, or newline are quoted; everything else
    is written verbatim, so ``load_csv`` inverts this rendering exactly.
    """
    if rows is None:
        rows = range(table.row_count)
    parts = [render_csv_row(table.schema.column_names)]
    for i in rows:
        if not 0 <= i < table.row_count:
            raise OutOfRange(i, table.row_count)
        parts.append(render_csv_row(table.rows[i]))
    return "".join(parts)


def class_counts(table: Table) -> dict[str, int]:
    """Label frequencies, keyed in order of first appearance."""
    counts: dict[str, int] = {}
    for i in range(table.row_count):
        label = table.label_of(i)
        counts[label] = counts.get(label, 0) + 1
    return counts
