"""Lexer, parser, and evaluator for the DFQ retrieval-query dialect.

The dialect covers the query shapes the retrieval step solicits: column
comparisons, list membership, and/or/not connectives, and parentheses.
Identifiers may be bare words, backtick-quoted names, or -- leniently --
runs of adjacent bare words matched against schema columns joined by
spaces or underscores (``petal length`` resolves to ``petal_length``).

Missing cells follow three-valued logic: any comparison or membership test
over a missing cell is unknown, unknown propagates through the connectives
(Kleene semantics), and an unknown result at the top level excludes the
row. In particular ``not (x < 5)`` does not select rows where x is missing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .table import ColumnKind, Schema, Table

__all__ = [
    "Comparison",
    "Membership",
    "Logical",
    "Not",
    "QueryAst",
    "ParseError",
    "parse_query",
    "evaluate_query",
    "render_query",
]

COMPARISON_OPS = ("==", "!=", "<=", ">=", "<", ">")


@dataclass(frozen=True)
class Comparison:
    column: str
    op: str  # one of COMPARISON_OPS
    value: Union[float, str, bool]


@dataclass(frozen=True)
class Membership:
    column: str
    negated: bool
    values: tuple[Union[float, str], ...]


@dataclass(frozen=True)
class Logical:
    op: str  # "and" | "or"
    left: "QueryAst"
    right: "QueryAst"


@dataclass(frozen=True)
class Not:
    child: "QueryAst"


QueryAst = Union[Comparison, Membership, Logical, Not]


class ParseError(Exception):
    """Query rejected at parse or resolution time.

    kind is one of: UnexpectedToken, UnknownColumn, TypeMismatch,
    UnbalancedParen, EmptyQuery.
    """

    def __init__(self, position: int, kind: str, detail: str) -> None:
        self.position = position
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind} at {position}: {detail}")


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op>==|!=|<=|>=|<|>)
  | (?P<amp>&)
  | (?P<pipe>\|)
  | (?P<tilde>~)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<lbracket>\[)
  | (?P<rbracket>\])
  | (?P<comma>,)
  | (?P<minus>-)
  | (?P<plus>\+)
  | (?P<number>(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)
  | (?P<string>'[^']*'|"[^"]*")
  | (?P<backtick>`[^`]*`)
  | (?P<word>\w+)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not", "in"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(pos, "UnexpectedToken", f"unrecognized character {text[pos]!r}")
        kind = m.lastgroup or ""
        value = m.group()
        if kind != "ws":
            if kind == "word" and value.lower() in _KEYWORDS:
                kind = value.lower()
            elif kind == "amp":
                kind = "and"
            elif kind == "pipe":
                kind = "or"
            elif kind == "tilde":
                kind = "not"
            tokens.append(_Token(kind, value, pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent; precedence or < and < not < comparison)


class _Parser:
    def __init__(self, tokens: list[_Token], schema: Schema) -> None:
        self.tokens = tokens
        self.i = 0
        self.schema = schema

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            if kind == "rparen":
                raise ParseError(tok.pos, "UnbalancedParen", "expected ')'")
            raise ParseError(tok.pos, "UnexpectedToken", f"expected {kind}, got {tok.text!r}")
        return self.advance()

    def parse(self) -> QueryAst:
        expr = self.parse_or()
        tok = self.peek()
        if tok.kind != "eof":
            if tok.kind == "rparen":
                raise ParseError(tok.pos, "UnbalancedParen", "unmatched ')'")
            raise ParseError(tok.pos, "UnexpectedToken", f"trailing input {tok.text!r}")
        return expr

    def parse_or(self) -> QueryAst:
        left = self.parse_and()
        while self.peek().kind == "or":
            self.advance()
            left = Logical("or", left, self.parse_and())
        return left

    def parse_and(self) -> QueryAst:
        left = self.parse_not()
        while self.peek().kind == "and":
            self.advance()
            left = Logical("and", left, self.parse_not())
        return left

    def parse_not(self) -> QueryAst:
        if self.peek().kind == "not":
            tok = self.advance()
            if self.peek().kind == "in":
                # "not in" only makes sense after a column; here it is stray
                raise ParseError(tok.pos, "UnexpectedToken", "'not in' without a column")
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self) -> QueryAst:
        tok = self.peek()
        if tok.kind == "lparen":
            self.advance()
            expr = self.parse_or()
            self.expect("rparen")
            return expr
        column, col_pos = self.parse_column_ref()
        return self.parse_predicate(column, col_pos)

    def parse_column_ref(self) -> tuple[str, int]:
        tok = self.peek()
        if tok.kind == "backtick":
            self.advance()
            name = tok.text[1:-1]
            if name not in self.schema.column_names:
                raise ParseError(tok.pos, "UnknownColumn", f"no column named {name!r}")
            return name, tok.pos
        if tok.kind != "word":
            raise ParseError(tok.pos, "UnexpectedToken", f"expected a column, got {tok.text!r}")
        # Collect the maximal run of adjacent bare words, then resolve it
        # against the schema with spaces and with underscores.
        words = []
        start = tok.pos
        while self.peek().kind == "word":
            words.append(self.advance().text)
        joined = " ".join(words)
        for candidate in (joined, joined.replace(" ", "_")):
            if candidate in self.schema.column_names:
                return candidate, start
        raise ParseError(start, "UnknownColumn", f"no column matching {joined!r}")

    def parse_predicate(self, column: str, col_pos: int) -> QueryAst:
        kind = self.schema.kind_of(column)
        tok = self.peek()
        if tok.kind == "op":
            self.advance()
            value = self.parse_literal(column, kind)
            return Comparison(column, tok.text, value)
        if tok.kind in ("in", "not"):
            negated = False
            if tok.kind == "not":
                self.advance()
                self.expect("in")
                negated = True
            else:
                self.advance()
            return self.parse_membership(column, kind, negated)
        raise ParseError(tok.pos, "UnexpectedToken", f"expected an operator after {column!r}")

    def parse_membership(self, column: str, kind: ColumnKind, negated: bool) -> Membership:
        self.expect("lbracket")
        values: list[Union[float, str]] = []
        if self.peek().kind != "rbracket":
            values.append(self.parse_list_literal(column, kind))
            while self.peek().kind == "comma":
                self.advance()
                values.append(self.parse_list_literal(column, kind))
        self.expect("rbracket")
        return Membership(column, negated, tuple(values))

    def parse_list_literal(self, column: str, kind: ColumnKind) -> Union[float, str]:
        value = self.parse_literal(column, kind)
        if isinstance(value, bool):
            raise ParseError(self.peek().pos, "TypeMismatch", "booleans not allowed in lists")
        return value

    def parse_literal(self, column: str, kind: ColumnKind) -> Union[float, str, bool]:
        tok = self.peek()
        sign = 1.0
        if tok.kind in ("minus", "plus"):
            self.advance()
            sign = -1.0 if tok.kind == "minus" else 1.0
            num = self.expect("number")
            return self.check_type(column, kind, sign * float(num.text), num.pos)
        if tok.kind == "number":
            self.advance()
            return self.check_type(column, kind, float(tok.text), tok.pos)
        if tok.kind == "string":
            self.advance()
            return self.check_type(column, kind, tok.text[1:-1], tok.pos)
        if tok.kind == "word" and tok.text in ("True", "False"):
            self.advance()
            return self.check_type(column, kind, tok.text == "True", tok.pos)
        raise ParseError(tok.pos, "UnexpectedToken", f"expected a literal, got {tok.text!r}")

    def check_type(
        self, column: str, kind: ColumnKind, value: Union[float, str, bool], pos: int
    ) -> Union[float, str, bool]:
        if kind is ColumnKind.NUMERIC and not isinstance(value, float):
            raise ParseError(
                pos, "TypeMismatch", f"numeric column {column!r} compared to {value!r}"
            )
        if kind is ColumnKind.CATEGORICAL and isinstance(value, float):
            raise ParseError(
                pos, "TypeMismatch", f"categorical column {column!r} compared to number {value!r}"
            )
        return value


def parse_query(text: str, schema: Schema) -> QueryAst:
    """Parse *text* into a type-checked AST resolved against *schema*."""
    if not text.strip():
        raise ParseError(0, "EmptyQuery", "query is empty")
    return _Parser(_tokenize(text), schema).parse()


# ---------------------------------------------------------------------------
# Evaluator: vectorized three-valued masks (truth, known), truth => known.


def _column_masks(
    table: Table, column: str, op: str, value: Union[float, str, bool]
) -> tuple[np.ndarray, np.ndarray]:
    if table.schema.kind_of(column) is ColumnKind.NUMERIC:
        vals = table.numeric_values(column)
        known = ~np.isnan(vals)
        with np.errstate(invalid="ignore"):
            truth = _apply_op(op, vals, value)
        return truth & known, known
    texts = table.column_texts(column)
    known = np.array([c != "" for c in texts], dtype=bool)
    rhs = str(value) if isinstance(value, bool) else value
    arr = np.array(texts, dtype=object)
    truth = np.array(_apply_op(op, arr, rhs), dtype=bool)
    return truth & known, known


def _apply_op(op: str, lhs, rhs):
    if op == "==":
        return lhs == rhs
    if op == "!=":
        return lhs != rhs
    if op == "<":
        return lhs < rhs
    if op == "<=":
        return lhs <= rhs
    if op == ">":
        return lhs > rhs
    return lhs >= rhs


def _membership_masks(
    table: Table, node: Membership
) -> tuple[np.ndarray, np.ndarray]:
    if table.schema.kind_of(node.column) is ColumnKind.NUMERIC:
        vals = table.numeric_values(node.column)
        known = ~np.isnan(vals)
        truth = np.isin(vals, np.array(node.values, dtype=np.float64))
    else:
        texts = table.column_texts(node.column)
        known = np.array([c != "" for c in texts], dtype=bool)
        wanted = set(node.values)
        truth = np.array([c in wanted for c in texts], dtype=bool)
    if node.negated:
        truth = ~truth
    return truth & known, known


def _eval_masks(ast: QueryAst, table: Table) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(ast, Comparison):
        return _column_masks(table, ast.column, ast.op, ast.value)
    if isinstance(ast, Membership):
        return _membership_masks(table, ast)
    if isinstance(ast, Not):
        truth, known = _eval_masks(ast.child, table)
        return ~truth & known, known
    if isinstance(ast, Logical):
        lt, lk = _eval_masks(ast.left, table)
        rt, rk = _eval_masks(ast.right, table)
        if ast.op == "and":
            truth = lt & rt
            known = (lk & rk) | (lk & ~lt) | (rk & ~rt)
        else:
            truth = lt | rt
            known = (lk & rk) | lt | rt
        return truth & known, known
    raise TypeError(f"not a query node: {ast!r}")


def evaluate_query(ast: QueryAst, table: Table) -> list[int]:
    """Indices, ascending, of rows where the expression is definitely true."""
    truth, _known = _eval_masks(ast, table)
    return [int(i) for i in np.nonzero(truth)[0]]


# ---------------------------------------------------------------------------
# Renderer: canonical text form (backticked columns, explicit parens)


def _render_literal(value: Union[float, str, bool]) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, float):
        return repr(value)
    if "'" not in value:
        return "'" + value + "'"
    if '"' not in value:
        return '"' + value + '"'
    raise ValueError(f"string literal {value!r} mixes both quote characters")


def render_query(ast: QueryAst) -> str:
    """Render an AST back to query text; re-parsing yields an equal AST."""
    if isinstance(ast, Comparison):
        return f"`{ast.column}` {ast.op} {_render_literal(ast.value)}"
    if isinstance(ast, Membership):
        items = ", ".join(_render_literal(v) for v in ast.values)
        keyword = "not in" if ast.negated else "in"
        return f"`{ast.column}` {keyword} [{items}]"
    if isinstance(ast, Not):
        return f"not ({render_query(ast.child)})"
    if isinstance(ast, Logical):
        return f"({render_query(ast.left)} {ast.op} {render_query(ast.right)})"
    raise TypeError(f"not a query node: {ast!r}")
