"""HTTP service wrapping the pipeline for long-running, multi-client use.

Summarization is the expensive step, so clients can hold on to the
rendered summary a ``/v1/summarize`` call returns and pass it back to
``/v1/predict``, paying the cost once per dataset. All endpoints are
stateless; datasets travel as CSV text in the request body.
"""

from __future__ import annotations

from fractions import Fraction

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .backends.base import StepBackend
from .backends.chat import ChatClient, EndpointConfig, PromptedBackend
from .backends.oracle import OracleBackend, OracleError
from .chunking import ChunkingError
from .pipeline import (
    ConfigError,
    PipelineError,
    RetrievalResult,
    RunConfig,
    predict_row,
    retrieve_rows,
    run,
    summarize_dataset,
    synthesize_test_set,
)
from .prompts import PromptError
from .query import ParseError, evaluate_query, parse_query
from .reporting import TestRow, format_percent
from .summary import PatternTableError, parse_pattern_table, render_pattern_table
from .table import TableError, class_counts, load_csv_text

__all__ = ["app", "create_app"]


class ConfigFields(BaseModel):
    """Run-config overrides shared by the pipeline endpoints."""

    backend: str = Field("oracle", pattern="^(oracle|http)$")
    model: str = ""
    seed: int = 42
    chunk_budget: int = 15_000
    result_budget: int | None = None
    query_max_chars: int = 350
    test_fraction: float = 0.20
    per_class_cap: int = 10
    parallelism: int = 4

    def run_config(self) -> RunConfig:
        try:
            return RunConfig(
                chunk_budget=self.chunk_budget,
                result_budget=self.result_budget,
                query_max_chars=self.query_max_chars,
                test_fraction=self.test_fraction,
                per_class_cap=self.per_class_cap,
                rng_seed=self.seed,
                parallelism=self.parallelism,
            )
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    def step_backend(self) -> StepBackend:
        if self.backend == "oracle":
            return OracleBackend(query_max_chars=self.query_max_chars)
        try:
            endpoint = EndpointConfig.from_env()
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        if not self.model:
            raise HTTPException(status_code=422, detail="http backend requires a model name")
        return PromptedBackend(ChatClient(endpoint, parallelism=self.parallelism), self.model)


class HealthResponse(BaseModel):
    status: str
    version: str


class SummarizeRequest(ConfigFields):
    csv_text: str
    label_column: str


class SummarizeResponse(BaseModel):
    summary_csv: str
    class_counts: dict[str, int]
    labels: list[str]


class QueryRequest(BaseModel):
    csv_text: str
    label_column: str
    query: str


class QueryResponse(BaseModel):
    row_indices: list[int]
    match_count: int


class PredictRequest(ConfigFields):
    csv_text: str
    label_column: str
    row: dict[str, str]
    summary_csv: str | None = None  # skip re-summarizing when provided


class PredictResponse(BaseModel):
    prediction: str
    reason: str
    query: str
    retrieval_attempts: int
    retrieved_count: int
    retrieval_failed: bool


class RunRequest(ConfigFields):
    csv_text: str
    label_column: str
    dataset_name: str = "dataset"


class RecordModel(BaseModel):
    test_row: dict
    generated_query: str
    retrieval_attempts: int
    retrieved_row_indices: list[int]
    retrieval_failed: bool
    predicted_label: str
    reason: str
    correct: bool


class RunResponse(BaseModel):
    dataset_name: str
    record_count: int
    correct_count: int
    accuracy: float
    accuracy_percent: str
    confusion: dict[str, dict[str, int]]
    summary_csv: str
    records: list[RecordModel]


def _load_table(csv_text: str, label_column: str):
    try:
        return load_csv_text(csv_text, label_column)
    except TableError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def create_app() -> FastAPI:
    app = FastAPI(title="lmldap", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/v1/summarize", response_model=SummarizeResponse)
    def summarize(request: SummarizeRequest) -> SummarizeResponse:
        table = _load_table(request.csv_text, request.label_column)
        try:
            summary = summarize_dataset(table, request.step_backend(), request.run_config())
        except (PipelineError, ChunkingError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        counts = class_counts(table)
        return SummarizeResponse(
            summary_csv=render_pattern_table(summary),
            class_counts=counts,
            labels=list(counts),
        )

    @app.post("/v1/query", response_model=QueryResponse)
    def query(request: QueryRequest) -> QueryResponse:
        table = _load_table(request.csv_text, request.label_column)
        try:
            ast = parse_query(request.query, table.schema)
        except ParseError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        indices = evaluate_query(ast, table)
        return QueryResponse(row_indices=indices, match_count=len(indices))

    @app.post("/v1/predict", response_model=PredictResponse)
    def predict(request: PredictRequest) -> PredictResponse:
        table = _load_table(request.csv_text, request.label_column)
        config = request.run_config()
        backend = request.step_backend()
        feature_names = {c.name for c in table.schema.feature_columns}
        missing = feature_names - set(request.row)
        if missing:
            raise HTTPException(
                status_code=422, detail=f"row is missing feature columns: {sorted(missing)}"
            )
        test_row = TestRow(values=dict(request.row), label="")
        try:
            if request.summary_csv is not None:
                summary = parse_pattern_table(
                    request.summary_csv, request.label_column, list(class_counts(table))
                )
            else:
                summary = summarize_dataset(table, backend, config)
            retrieval = retrieve_rows(test_row, summary, table, backend, config)
            record = predict_row(test_row, retrieval, summary, table, backend, config)
        except (PipelineError, ChunkingError, PatternTableError, OracleError, PromptError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return PredictResponse(
            prediction=record.predicted_label,
            reason=record.reason,
            query=record.generated_query,
            retrieval_attempts=record.retrieval_attempts,
            retrieved_count=len(record.retrieved_row_indices),
            retrieval_failed=record.retrieval_failed,
        )

    @app.post("/v1/run", response_model=RunResponse)
    def run_endpoint(request: RunRequest) -> RunResponse:
        table = _load_table(request.csv_text, request.label_column)
        try:
            report = run(
                table,
                request.step_backend(),
                request.run_config(),
                dataset_name=request.dataset_name,
            )
        except (PipelineError, ChunkingError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return RunResponse(
            dataset_name=report.dataset_name,
            record_count=len(report.records),
            correct_count=report.correct_count,
            accuracy=float(report.accuracy),
            accuracy_percent=format_percent(report.accuracy),
            confusion=report.confusion,
            summary_csv=report.summary_text,
            records=[RecordModel(**r.to_json()) for r in report.records],
        )

    return app


app = create_app()
