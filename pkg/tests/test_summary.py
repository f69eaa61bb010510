from __future__ import annotations

import random
from pathlib import Path

import pytest

from lmldap.summary import (
    CategorySet,
    DuplicateLabel,
    MalformedCell,
    MissingColumn,
    NumericRange,
    UnknownLabel,
    parse_pattern_table,
    render_pattern_table,
)

from _gen import random_summary

REFERENCE = Path(__file__).parent / "data" / "reference_summary_table.txt"

IRIS_LABELS = ["Iris-setosa", "Iris-versicolor", "Iris-virginica"]


def test_parse_csv_row_with_ranges():
    text = (
        "Label (species),sepal_length,sepal_width,petal_length,petal_width,Num rows,Comments\n"
        'Iris-setosa,"4.3-5.8 (avg: 5.01)","2.3-4.4 (avg: 3.4)","1.0-1.9 (avg: 1.51)",'
        '"0.1-0.6 (avg: 0.24)",50,""\n'
    )
    summary = parse_pattern_table(text, "species", IRIS_LABELS)
    row = summary.row_for("Iris-setosa")
    assert row.patterns["sepal_length"] == NumericRange(4.3, 5.8, 5.01)
    assert row.num_rows == 50
    assert row.comments == ""


def test_duplicate_label_rejected():
    text = (
        "Label,x,Num rows\n"
        "Iris-setosa,1-2 (avg: 1.5),50\n"
        "Iris-setosa,1-3 (avg: 2.0),50\n"
    )
    with pytest.raises(DuplicateLabel):
        parse_pattern_table(text, "species", IRIS_LABELS)


def test_unknown_label_rejected():
    text = "Label,x,Num rows\nIris-bogus,1-2 (avg: 1.5),50\n"
    with pytest.raises(UnknownLabel):
        parse_pattern_table(text, "species", IRIS_LABELS)


def test_category_cell_splits():
    text = 'Label,color,Num rows\nIris-setosa,"a, b, c",50\n'
    summary = parse_pattern_table(text, "species", IRIS_LABELS)
    assert summary.row_for("Iris-setosa").patterns["color"] == CategorySet(("a", "b", "c"))


def test_missing_num_rows_column():
    with pytest.raises(MissingColumn) as err:
        parse_pattern_table("Label,x\nIris-setosa,1-2 (avg: 1.5)\n", "species", IRIS_LABELS)
    assert err.value.name == "Num rows"


def test_missing_label_column():
    with pytest.raises(MissingColumn):
        parse_pattern_table("x,Num rows\n1-2 (avg: 1.5),50\n", "species", IRIS_LABELS)


def test_bad_num_rows_cell():
    text = "Label,x,Num rows\nIris-setosa,1-2 (avg: 1.5),many\n"
    with pytest.raises(MalformedCell):
        parse_pattern_table(text, "species", IRIS_LABELS)


def test_comments_column_optional():
    text = "Label,x,Num rows\nIris-setosa,1-2 (avg: 1.5),50\n"
    summary = parse_pattern_table(text, "species", IRIS_LABELS)
    assert summary.row_for("Iris-setosa").comments == ""


def test_reference_table_parses():
    summary = parse_pattern_table(REFERENCE.read_text(), "species", IRIS_LABELS)
    assert summary.labels == tuple(IRIS_LABELS)
    setosa = summary.row_for("Iris-setosa")
    assert setosa.patterns["sepal_length"] == NumericRange(4.3, 5.8, 5.01)
    assert setosa.patterns["petal width"] == NumericRange(0.1, 0.6, 0.24)
    assert [r.num_rows for r in summary.rows] == [50, 50, 50]


def test_pipe_table_with_separator():
    text = (
        "| Label | x | Num rows | Comments |\n"
        "|-------|---|----------|----------|\n"
        "| Iris-setosa | 1.0-2.0 (avg: 1.5) | 50 | looks clean |\n"
    )
    summary = parse_pattern_table(text, "species", IRIS_LABELS)
    row = summary.row_for("Iris-setosa")
    assert row.patterns["x"] == NumericRange(1.0, 2.0, 1.5)
    assert row.comments == "looks clean"


def test_bare_average_format_accepted():
    text = "Label,x,Num rows\nIris-setosa,1.0-2.0 (1.5),50\n"
    summary = parse_pattern_table(text, "species", IRIS_LABELS)
    assert summary.row_for("Iris-setosa").patterns["x"] == NumericRange(1.0, 2.0, 1.5)


def test_negative_range_cells():
    text = "Label,x,Num rows\nIris-setosa,-3.5--1.2 (avg: -2.0),50\n"
    summary = parse_pattern_table(text, "species", IRIS_LABELS)
    assert summary.row_for("Iris-setosa").patterns["x"] == NumericRange(-3.5, -1.2, -2.0)


def test_label_column_recovered_from_header():
    text = "Label (species),x,Num rows\nIris-setosa,1-2 (avg: 1.5),50\n"
    summary = parse_pattern_table(text)
    assert summary.label_column == "species"
    assert summary.labels == ("Iris-setosa",)


def test_empty_cell_means_no_pattern():
    text = "Label,x,y,Num rows\nIris-setosa,,1-2 (avg: 1.5),50\n"
    summary = parse_pattern_table(text, "species", IRIS_LABELS)
    assert "x" not in summary.row_for("Iris-setosa").patterns


def test_render_round_trip_samples():
    rng = random.Random(31)
    for _ in range(120):
        summary = random_summary(rng)
        again = parse_pattern_table(
            render_pattern_table(summary), summary.label_column, list(summary.labels)
        )
        assert again.labels == summary.labels
        for label in summary.labels:
            orig, back = summary.row_for(label), again.row_for(label)
            assert back.num_rows == orig.num_rows
            assert back.comments == orig.comments
            assert set(back.patterns) == set(orig.patterns)
            for column, pattern in orig.patterns.items():
                parsed = back.patterns[column]
                if isinstance(pattern, NumericRange):
                    assert parsed.min == pattern.min
                    assert parsed.max == pattern.max
                    assert parsed.avg == round(pattern.avg, 2)
                else:
                    assert parsed == pattern


def test_render_quotes_category_lists():
    rng = random.Random(2)
    summary = random_summary(rng)
    text = render_pattern_table(summary)
    assert text.startswith(f"Label ({summary.label_column})")
