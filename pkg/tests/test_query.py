from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from lmldap.query import (
    Comparison,
    Logical,
    Membership,
    Not,
    ParseError,
    evaluate_query,
    parse_query,
    render_query,
)
from lmldap.table import load_csv_text

from _gen import random_ast, random_table
from _naive_eval import naive_evaluate


def test_paper_style_query_lenient_resolution(iris):
    ast = parse_query("( petal length >1.0 and petal width <1.0 )", iris.schema)
    assert ast == Logical(
        "and",
        Comparison("petal_length", ">", 1.0),
        Comparison("petal_width", "<", 1.0),
    )


def test_spaced_column_resolves_to_spaced_name():
    table = load_csv_text("petal length,label\n1.0,x\n", "label")
    ast = parse_query("petal length > 0.5", table.schema)
    assert ast == Comparison("petal length", ">", 0.5)


def test_backtick_and_or(iris):
    ast = parse_query("`sepal_width` >= 3.0 or species == 'Iris-setosa'", iris.schema)
    assert ast == Logical(
        "or",
        Comparison("sepal_width", ">=", 3.0),
        Comparison("species", "==", "Iris-setosa"),
    )


def test_symbol_synonyms(iris):
    a = parse_query("sepal_length > 1 & ~(petal_width < 2) | species == 'x'", iris.schema)
    b = parse_query("sepal_length > 1 and not (petal_width < 2) or species == 'x'", iris.schema)
    assert a == b


def test_keywords_case_insensitive(iris):
    a = parse_query("species IN ['Iris-setosa'] AND sepal_length > 1", iris.schema)
    b = parse_query("species in ['Iris-setosa'] and sepal_length > 1", iris.schema)
    assert a == b


def test_membership_not_in(iris):
    ast = parse_query("species not in ['Iris-setosa', 'Iris-virginica']", iris.schema)
    assert ast == Membership("species", True, ("Iris-setosa", "Iris-virginica"))


def test_negative_literal(iris):
    assert parse_query("sepal_length > -1.5", iris.schema) == Comparison(
        "sepal_length", ">", -1.5
    )


@pytest.mark.parametrize(
    "text,kind",
    [
        ("sepal_length >", "UnexpectedToken"),
        ("nosuch > 1", "UnknownColumn"),
        ("sepal_length > 'x'", "TypeMismatch"),
        ("species == 3", "TypeMismatch"),
        ("(sepal_length > 1", "UnbalancedParen"),
        ("sepal_length > 1)", "UnbalancedParen"),
        ("  ", "EmptyQuery"),
        ("sepal_length in [1, 'a']", "TypeMismatch"),
        ("1 < sepal_length", "UnexpectedToken"),
        ("sepal_length < petal_length", "UnexpectedToken"),
    ],
)
def test_parse_errors(iris, text, kind):
    with pytest.raises(ParseError) as err:
        parse_query(text, iris.schema)
    assert err.value.kind == kind
    assert 0 <= err.value.position <= len(text) + 1


def test_rejected_dialect_features(iris):
    for text in ("1 < sepal_length < 5", "sepal_length + 1 > 2", "sepal_length > @v"):
        with pytest.raises(ParseError):
            parse_query(text, iris.schema)


def test_petal_width_selects_exactly_setosa(iris):
    ast = parse_query("petal_width < 1.0", iris.schema)
    indices = evaluate_query(ast, iris)
    # brute force over raw rows
    expected = [
        i
        for i in range(iris.row_count)
        if float(iris.rows[i][iris.schema.index_of("petal_width")]) < 1.0
    ]
    assert indices == expected
    assert len(indices) == 50
    assert all(iris.label_of(i) == "Iris-setosa" for i in indices)


def test_tautology_selects_all(iris):
    ast = parse_query("sepal_length >= 0", iris.schema)
    assert evaluate_query(ast, iris) == list(range(150))


def test_membership_selects_two_classes(iris):
    ast = parse_query("species in ['Iris-setosa', 'Iris-virginica']", iris.schema)
    indices = evaluate_query(ast, iris)
    brute = [
        i
        for i in range(iris.row_count)
        if iris.label_of(i) in ("Iris-setosa", "Iris-virginica")
    ]
    assert indices == brute
    assert len(indices) == 100


def test_missing_cells_block_not():
    table = load_csv_text("x,label\n,a\n1.0,a\n9.0,a\n", "label")
    ast = parse_query("not (x < 5)", table.schema)
    # row 0 has no x: excluded even under negation
    assert evaluate_query(ast, table) == [2]


def test_missing_cells_or_still_selects_known_true():
    table = load_csv_text("x,y,label\n,2.0,a\n7.0,9.0,a\n", "label")
    ast = parse_query("x < 5 or y < 5", table.schema)
    # row 0: x unknown, but y < 5 is definitely true
    assert evaluate_query(ast, table) == [0]


def test_naive_interpreter_agrees_small():
    rng = random.Random(99)
    for _ in range(150):
        table = random_table(rng, max_rows=40, max_cols=5)
        ast = random_ast(rng, table, depth=4)
        assert evaluate_query(ast, table) == naive_evaluate(ast, table)


def test_render_parse_round_trip_samples():
    rng = random.Random(7)
    for _ in range(200):
        table = random_table(rng, max_rows=5, max_cols=6)
        ast = random_ast(rng, table, depth=4)
        assert parse_query(render_query(ast), table.schema) == ast


def test_monotonicity():
    rng = random.Random(5)
    for _ in range(100):
        table = random_table(rng, max_rows=60, max_cols=5)
        a = random_ast(rng, table, depth=2)
        b = random_ast(rng, table, depth=2)
        both = set(evaluate_query(Logical("and", a, b), table))
        either = set(evaluate_query(Logical("or", a, b), table))
        only_a = set(evaluate_query(a, table))
        assert both <= only_a <= either


def test_de_morgan_on_complete_data():
    rng = random.Random(11)
    for _ in range(100):
        table = random_table(rng, max_rows=60, max_cols=5, missing_rate=0.0)
        a = random_ast(rng, table, depth=2)
        b = random_ast(rng, table, depth=2)
        lhs = evaluate_query(Not(Logical("and", a, b)), table)
        rhs = evaluate_query(Logical("or", Not(a), Not(b)), table)
        assert lhs == rhs


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_naive_interpreter_agrees_property(seed):
    rng = random.Random(seed)
    table = random_table(rng, max_rows=50, max_cols=6)
    ast = random_ast(rng, table, depth=4)
    assert evaluate_query(ast, table) == naive_evaluate(ast, table)
