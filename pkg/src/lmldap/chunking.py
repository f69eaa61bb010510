"""Token counting and packing of a table into budget-fitting chunks.

Each chunk is a contiguous row range whose CSV rendering (header included,
since chunks are processed independently) stays within the per-request
token budget. The default counter is the ceil(chars / 4) heuristic; exact
model tokenizers can be plugged in through :class:`TokenCounter` as long
as they are monotone under concatenation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .table import Table, to_csv_text

__all__ = [
    "TokenCounter",
    "DEFAULT_COUNTER",
    "DEFAULT_CHUNK_BUDGET",
    "count_tokens",
    "Chunk",
    "ChunkingError",
    "EmptyTable",
    "RowExceedsBudget",
    "pack_chunks",
    "max_rows_within_budget",
]

DEFAULT_CHUNK_BUDGET = 15_000


class ChunkingError(Exception):
    pass


class EmptyTable(ChunkingError):
    def __init__(self) -> None:
        super().__init__("cannot pack a table with no rows")


class RowExceedsBudget(ChunkingError):
    def __init__(self, row_index: int, tokens: int, budget: int) -> None:
        self.row_index = row_index
        super().__init__(
            f"header plus row {row_index} is {tokens} tokens, over the {budget}-token budget"
        )


def _heuristic_count(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class TokenCounter:
    """A named text -> token-count function.

    The count must be monotone under concatenation (count(a + b) >=
    max(count(a), count(b))), which the packer relies on to binary-search
    chunk boundaries.
    """

    name: str
    count: Callable[[str], int]

    def __call__(self, text: str) -> int:
        return self.count(text)


DEFAULT_COUNTER = TokenCounter(name="chars/4", count=_heuristic_count)


def count_tokens(text: str, counter: TokenCounter = DEFAULT_COUNTER) -> int:
    return counter(text)


@dataclass(frozen=True)
class Chunk:
    table: Table
    start: int
    stop: int  # exclusive
    token_count: int

    @property
    def row_range(self) -> range:
        return range(self.start, self.stop)

    def csv_text(self) -> str:
        return to_csv_text(self.table, self.row_range)


def _prefix_tokens(table: Table, start: int, stop: int, counter: TokenCounter) -> int:
    return counter(to_csv_text(table, range(start, stop)))


def pack_chunks(
    table: Table,
    budget: int = DEFAULT_CHUNK_BUDGET,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> list[Chunk]:
    """Greedily pack rows into maximal chunks within *budget* tokens.

    Chunks are contiguous, disjoint, cover every row in order, and each is
    maximal: appending the next row would push its rendering over budget.
    """
    if table.row_count == 0:
        raise EmptyTable()
    chunks: list[Chunk] = []
    start = 0
    while start < table.row_count:
        first = _prefix_tokens(table, start, start + 1, counter)
        if first > budget:
            raise RowExceedsBudget(start, first, budget)
        # Gallop then bisect for the largest stop with rendering <= budget;
        # valid because each rendering is a prefix of the next.
        lo = start + 1
        hi = min(start + 2, table.row_count)
        while hi < table.row_count and _prefix_tokens(table, start, hi, counter) <= budget:
            lo = hi
            hi = min(start + 2 * (hi - start), table.row_count)
        if _prefix_tokens(table, start, hi, counter) <= budget:
            lo = hi
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if _prefix_tokens(table, start, mid, counter) <= budget:
                lo = mid
            else:
                hi = mid - 1
        stop = lo
        chunks.append(Chunk(table, start, stop, _prefix_tokens(table, start, stop, counter)))
        start = stop
    return chunks


def max_rows_within_budget(
    table: Table,
    indices: list[int],
    budget: int,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> list[int]:
    """Longest prefix of *indices* whose CSV rendering fits in *budget*."""
    lo, hi = 0, len(indices)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if counter(to_csv_text(table, indices[:mid])) <= budget:
            lo = mid
        else:
            hi = mid - 1
    return indices[:lo]
