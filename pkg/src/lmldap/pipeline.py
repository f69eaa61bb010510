"""End-to-end orchestration: synthesize, summarize, retrieve, predict.

The pipeline drives a :class:`~lmldap.backends.base.StepBackend` through
the four semantic steps, owning prompt-side rendering (chunk CSV, dtypes,
test rows) and response-side validation (tag extraction, pattern-table
parsing, query checking), so prompted and oracle backends share one code
path. Per-test-row work runs concurrently up to the configured
parallelism; results are deterministic for a deterministic backend.
"""

from __future__ import annotations

import logging
import math
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .backends.base import StepBackend
from .backends.chat import BackendError, RetryPolicy
from .chunking import (
    DEFAULT_CHUNK_BUDGET,
    DEFAULT_COUNTER,
    TokenCounter,
    max_rows_within_budget,
    pack_chunks,
)
from .prompts import PromptError, extract_tagged
from .query import ParseError, evaluate_query, parse_query
from .reporting import FAILED_LABEL, PredictionRecord, RunReport, TestRow
from .summary import (
    PatternSummary,
    PatternTableError,
    parse_pattern_table,
    render_pattern_table,
)
from .table import ColumnKind, Schema, Table, class_counts, render_csv_row, to_csv_text

__all__ = [
    "RunConfig",
    "ConfigError",
    "PipelineError",
    "LabelMismatch",
    "EmptyClass",
    "SummarizeFailed",
    "MergeFailed",
    "PredictFailed",
    "RetrievalResult",
    "synthesize_test_set",
    "average_pair",
    "dtypes_text",
    "render_row_csv",
    "merge_summary_texts",
    "summarize_dataset",
    "retrieve_rows",
    "predict_row",
    "run",
]

logger = logging.getLogger(__name__)


class PipelineError(Exception):
    pass


class ConfigError(PipelineError):
    pass


class LabelMismatch(PipelineError):
    def __init__(self, a: str, b: str) -> None:
        super().__init__(f"cannot average rows with labels {a!r} and {b!r}")


class EmptyClass(PipelineError):
    def __init__(self, label: str) -> None:
        super().__init__(f"class {label!r} has no training rows")


class SummarizeFailed(PipelineError):
    def __init__(self, chunk_index: int, last: Exception) -> None:
        self.chunk_index = chunk_index
        self.last = last
        super().__init__(f"summarizing chunk {chunk_index} failed: {last}")


class MergeFailed(PipelineError):
    def __init__(self, last: Exception) -> None:
        self.last = last
        super().__init__(f"merging summaries failed: {last}")


class PredictFailed(PipelineError):
    def __init__(self, last: Exception | str) -> None:
        self.last = last
        super().__init__(f"prediction failed: {last}")


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one pipeline run; defaults mirror the documented protocol."""

    chunk_budget: int = DEFAULT_CHUNK_BUDGET
    result_budget: int | None = None  # defaults to double the chunk budget
    query_max_chars: int = 350
    test_fraction: float = 0.20
    per_class_cap: int = 10
    retrieval_max_attempts: int = 3
    step_retry: RetryPolicy = RetryPolicy()
    rng_seed: int = 42
    parallelism: int = 4
    counter: TokenCounter = DEFAULT_COUNTER

    def __post_init__(self) -> None:
        if self.result_budget is None:
            object.__setattr__(self, "result_budget", 2 * self.chunk_budget)
        for name in (
            "chunk_budget",
            "result_budget",
            "query_max_chars",
            "per_class_cap",
            "retrieval_max_attempts",
            "parallelism",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 0 < self.test_fraction <= 1:
            raise ConfigError(f"test_fraction must be in (0, 1], got {self.test_fraction!r}")

    def to_dict(self) -> dict:
        return {
            "chunk_budget": self.chunk_budget,
            "result_budget": self.result_budget,
            "query_max_chars": self.query_max_chars,
            "test_fraction": self.test_fraction,
            "per_class_cap": self.per_class_cap,
            "retrieval_max_attempts": self.retrieval_max_attempts,
            "step_retry": {
                "max_attempts": self.step_retry.max_attempts,
                "base_delay": self.step_retry.base_delay,
                "backoff_factor": self.step_retry.backoff_factor,
                "retryable": sorted(self.step_retry.retryable),
            },
            "rng_seed": self.rng_seed,
            "parallelism": self.parallelism,
            "token_counter": self.counter.name,
        }


# ---------------------------------------------------------------------------
# Test-set synthesis


def average_pair(row_a: Sequence[str], row_b: Sequence[str], schema: Schema) -> tuple[str, ...]:
    """Average two same-label rows: numeric mean, first-of-pair categories.

    A missing numeric cell defers to its partner; two missing cells stay
    missing.
    """
    label_idx = schema.index_of(schema.label_column)
    if row_a[label_idx] != row_b[label_idx]:
        raise LabelMismatch(row_a[label_idx], row_b[label_idx])
    out: list[str] = []
    for j, column in enumerate(schema.columns):
        a, b = row_a[j], row_b[j]
        if column.kind is ColumnKind.NUMERIC and j != label_idx:
            if a == "" and b == "":
                out.append("")
            elif a == "":
                out.append(b)
            elif b == "":
                out.append(a)
            else:
                out.append(repr((float(a) + float(b)) / 2))
        else:
            out.append(a)
    return tuple(out)


def synthesize_test_set(table: Table, config: RunConfig) -> list[TestRow]:
    """Per class: average 2*d random same-label rows pairwise into d rows.

    d is ceil(test_fraction * class size) capped at per_class_cap. Draws
    are without replacement (with replacement when the class is smaller
    than 2*d), from one generator seeded with rng_seed, classes visited in
    first-appearance order; the training table is left intact.
    """
    rng = random.Random(config.rng_seed)
    counts = class_counts(table)
    members: dict[str, list[int]] = {label: [] for label in counts}
    for i in range(table.row_count):
        members[table.label_of(i)].append(i)

    label_idx = table.schema.index_of(table.schema.label_column)
    feature_names = [c.name for c in table.schema.feature_columns]
    out: list[TestRow] = []
    for label, n in counts.items():
        if n < 1:
            raise EmptyClass(label)
        desired = min(math.ceil(config.test_fraction * n), config.per_class_cap)
        k = 2 * desired
        pool = members[label]
        picks = rng.sample(pool, k) if k <= n else rng.choices(pool, k=k)
        for p in range(0, k, 2):
            averaged = average_pair(table.rows[picks[p]], table.rows[picks[p + 1]], table.schema)
            values = {
                name: averaged[table.schema.index_of(name)] for name in feature_names
            }
            out.append(TestRow(values=values, label=averaged[label_idx]))
    return out


# ---------------------------------------------------------------------------
# Prompt-side renderings


def dtypes_text(schema: Schema) -> str:
    """One 'name: numeric|categorical' line per feature column."""
    return "\n".join(f"{c.name}: {c.kind}" for c in schema.feature_columns)


def render_row_csv(schema: Schema, row: TestRow) -> str:
    """Feature columns of a test row as CSV (no label: it is the unknown)."""
    names = [c.name for c in schema.feature_columns]
    return render_csv_row(names) + render_csv_row([row.values.get(n, "") for n in names])


# ---------------------------------------------------------------------------
# Summarization with hierarchical merging


def _step_attempts(config: RunConfig):
    policy = config.step_retry
    for attempt in range(policy.max_attempts):
        yield attempt
        if attempt + 1 < policy.max_attempts and policy.base_delay > 0:
            time.sleep(policy.delay(attempt))


def _summarize_one_chunk(
    chunk_index: int,
    chunk_csv: str,
    backend: StepBackend,
    label_column: str,
    labels: Sequence[str],
    config: RunConfig,
) -> PatternSummary:
    last: Exception | None = None
    for _ in _step_attempts(config):
        try:
            raw = backend.summarize_chunk(chunk_csv, label_column, labels)
            payload = extract_tagged(raw, "patterns")
            return parse_pattern_table(payload, label_column, list(labels))
        except (BackendError, PromptError, PatternTableError) as exc:
            last = exc
            logger.warning("chunk %d summary attempt failed: %s", chunk_index, exc)
    assert last is not None
    raise SummarizeFailed(chunk_index, last)


def _merge_once(
    texts: Sequence[str],
    backend: StepBackend,
    label_column: str,
    labels: Sequence[str],
    config: RunConfig,
) -> PatternSummary:
    last: Exception | None = None
    for _ in _step_attempts(config):
        try:
            raw = backend.merge_summaries(list(texts), label_column, labels)
            payload = extract_tagged(raw, "patterns")
            return parse_pattern_table(payload, label_column, list(labels))
        except (BackendError, PromptError, PatternTableError) as exc:
            last = exc
            logger.warning("merge attempt failed: %s", exc)
    assert last is not None
    raise MergeFailed(last)


def _fits_budget(texts: Sequence[str], config: RunConfig) -> bool:
    return config.counter("\n\n".join(texts)) <= config.chunk_budget


def _budget_batches(texts: list[str], config: RunConfig) -> list[list[str]]:
    """Greedy maximal batches whose joined rendering fits the chunk budget."""
    batches: list[list[str]] = []
    current: list[str] = []
    for text in texts:
        if current and not _fits_budget([*current, text], config):
            batches.append(current)
            current = [text]
        else:
            current.append(text)
    if current:
        batches.append(current)
    if len(batches) == len(texts) and len(texts) > 1:
        # No pair fits the budget; force pairs so each level still shrinks.
        return [texts[i : i + 2] for i in range(0, len(texts), 2)]
    return batches


def merge_summary_texts(
    texts: Sequence[str],
    backend: StepBackend,
    label_column: str,
    labels: Sequence[str],
    config: RunConfig,
) -> PatternSummary:
    """Merge rendered summaries hierarchically until one remains.

    While the concatenation exceeds the chunk budget, summaries are merged
    in greedy budget-fitting batches; a final merge call always runs, even
    over a single text, mirroring the prompted flow.
    """
    texts = list(texts)
    while not _fits_budget(texts, config) and len(texts) > 1:
        batches = _budget_batches(texts, config)
        logger.info("consolidating %d summaries in %d merge batches", len(texts), len(batches))
        merged = [
            _merge_once(batch, backend, label_column, labels, config) for batch in batches
        ]
        texts = [render_pattern_table(s) for s in merged]
    return _merge_once(texts, backend, label_column, labels, config)


def summarize_dataset(
    table: Table, backend: StepBackend, config: RunConfig | None = None
) -> PatternSummary:
    """Chunk the table, summarize each chunk, and merge hierarchically."""
    config = config or RunConfig()
    labels = list(class_counts(table))
    label_column = table.schema.label_column
    chunks = pack_chunks(table, config.chunk_budget, config.counter)
    logger.info("summarizing %d chunk(s) of %d rows", len(chunks), table.row_count)

    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        summaries = list(
            pool.map(
                lambda pair: _summarize_one_chunk(
                    pair[0], pair[1].csv_text(), backend, label_column, labels, config
                ),
                enumerate(chunks),
            )
        )

    texts = [render_pattern_table(s) for s in summaries]
    return merge_summary_texts(texts, backend, label_column, labels, config)


# ---------------------------------------------------------------------------
# Retrieval and prediction


@dataclass
class RetrievalResult:
    row_indices: list[int]
    query: str
    attempts: int
    failed: bool


def retrieve_rows(
    test_row: TestRow,
    summary: PatternSummary,
    table: Table,
    backend: StepBackend,
    config: RunConfig | None = None,
) -> RetrievalResult:
    """Ask the backend for a retrieval query until one returns rows.

    A query is rejected when it exceeds the length cap, fails to parse, or
    matches nothing; each retry passes the rejected query so the prompt can
    quote it. After the attempt limit the failure is flagged and prediction
    proceeds on the summary alone.
    """
    config = config or RunConfig()
    summary_text = render_pattern_table(summary)
    dtypes = dtypes_text(table.schema)
    row_text = render_row_csv(table.schema, test_row)
    columns = [c.name for c in table.schema.feature_columns]
    prior: str | None = None
    attempts = 0
    for attempts in range(1, config.retrieval_max_attempts + 1):
        raw = backend.generate_query(dtypes, summary_text, row_text, columns, prior)
        try:
            query = extract_tagged(raw, "dfquery")
        except PromptError as exc:
            logger.warning("attempt %d: no query tag (%s)", attempts, exc)
            continue
        if len(query) > config.query_max_chars:
            logger.warning("attempt %d: query over %d chars", attempts, config.query_max_chars)
            prior = query
            continue
        try:
            ast = parse_query(query, table.schema)
        except ParseError as exc:
            logger.warning("attempt %d: query rejected (%s)", attempts, exc)
            prior = query
            continue
        indices = evaluate_query(ast, table)
        if not indices:
            logger.info("attempt %d: query matched no rows", attempts)
            prior = query
            continue
        kept = max_rows_within_budget(table, indices, config.result_budget, config.counter)
        return RetrievalResult(row_indices=kept, query=query, attempts=attempts, failed=False)
    return RetrievalResult(row_indices=[], query=prior or "", attempts=attempts, failed=True)


def _match_label(candidate: str, labels: Sequence[str]) -> str | None:
    candidate = candidate.strip()
    for label in labels:
        if candidate == label:
            return label
    folded = candidate.casefold()
    for label in labels:
        if folded == label.casefold():
            return label
    return None


def predict_row(
    test_row: TestRow,
    retrieval: RetrievalResult,
    summary: PatternSummary,
    table: Table,
    backend: StepBackend,
    config: RunConfig | None = None,
) -> PredictionRecord:
    """One classification: backend.predict plus tag and label validation."""
    config = config or RunConfig()
    labels = list(class_counts(table))
    summary_text = render_pattern_table(summary)
    row_text = render_row_csv(table.schema, test_row)
    if retrieval.row_indices:
        samples_text = to_csv_text(table, retrieval.row_indices)
    else:
        samples_text = "(no rows retrieved)"
    started = time.perf_counter()
    last: Exception | str = "no attempts made"
    for _ in _step_attempts(config):
        try:
            raw = backend.predict(samples_text, summary_text, row_text, labels)
        except BackendError as exc:
            last = exc
            continue
        try:
            candidate = extract_tagged(raw, "prediction")
        except PromptError as exc:
            last = exc
            continue
        matched = _match_label(candidate, labels)
        if matched is None:
            last = f"predicted label {candidate!r} is not one of {labels}"
            continue
        try:
            reason = extract_tagged(raw, "reason")
        except PromptError:
            reason = ""
        return PredictionRecord(
            test_row=test_row,
            generated_query=retrieval.query,
            retrieval_attempts=retrieval.attempts,
            retrieved_row_indices=list(retrieval.row_indices),
            retrieval_failed=retrieval.failed,
            predicted_label=matched,
            reason=reason,
            correct=matched == test_row.label,
            timings={"predict_seconds": time.perf_counter() - started},
        )
    raise PredictFailed(last)


def _failure_record(
    test_row: TestRow, retrieval: RetrievalResult, error: PredictFailed
) -> PredictionRecord:
    return PredictionRecord(
        test_row=test_row,
        generated_query=retrieval.query,
        retrieval_attempts=retrieval.attempts,
        retrieved_row_indices=list(retrieval.row_indices),
        retrieval_failed=retrieval.failed,
        predicted_label=FAILED_LABEL,
        reason=str(error),
        correct=False,
        timings={},
    )


def run(
    table: Table,
    backend: StepBackend,
    config: RunConfig | None = None,
    dataset_name: str = "dataset",
) -> RunReport:
    """Full pipeline: synthesize, summarize once, then classify each row.

    A failed prediction is recorded (predicted label ``<failed>``) rather
    than aborting the run; summarization failures abort.
    """
    config = config or RunConfig()
    test_rows = synthesize_test_set(table, config)
    summary = summarize_dataset(table, backend, config)

    def classify(indexed: tuple[int, TestRow]) -> tuple[int, PredictionRecord]:
        index, test_row = indexed
        started = time.perf_counter()
        retrieval = retrieve_rows(test_row, summary, table, backend, config)
        retrieve_seconds = time.perf_counter() - started
        try:
            record = predict_row(test_row, retrieval, summary, table, backend, config)
        except PredictFailed as exc:
            logger.error("test row %d: %s", index, exc)
            record = _failure_record(test_row, retrieval, exc)
        record.timings["retrieve_seconds"] = retrieve_seconds
        return index, record

    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        indexed = list(pool.map(classify, enumerate(test_rows)))
    records = tuple(record for _, record in sorted(indexed, key=lambda pair: pair[0]))
    return RunReport(
        dataset_name=dataset_name,
        config=config.to_dict(),
        summary_text=render_pattern_table(summary),
        records=records,
    )
