"""Command-line entry point: run, summarize, predict, serve.

Settings merge from four layers, highest precedence first: command-line
flags, ``LMLDAP_<NAME>`` environment variables, a flat ``key = value``
config file (``--config``), and built-in defaults. Exit codes are stable:
0 success, 2 configuration/usage, 3 summarization, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path
from typing import Sequence

from .backends.chat import (
    ENV_API_KEY,
    ENV_BASE_URL,
    ChatClient,
    EndpointConfig,
    PromptedBackend,
)
from .backends.oracle import OracleBackend, OracleError
from .chunking import ChunkingError, EmptyTable
from .pipeline import (
    ConfigError,
    MergeFailed,
    PredictFailed,
    RunConfig,
    SummarizeFailed,
    predict_row,
    retrieve_rows,
    run,
    summarize_dataset,
)
from .prompts import TemplateSet
from .query import ParseError
from .reporting import TestRow, format_percent, persist_report
from .summary import PatternTableError, parse_pattern_table, render_pattern_table
from .table import EmptyInput, MissingLabelColumn, Table, TableError, class_counts, load_csv

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SUMMARIZE = 3
EXIT_IO = 4

ENV_PREFIX = "LMLDAP_"

# name, type, default, help
_SETTINGS = [
    ("data", str, None, "path to the training CSV"),
    ("label", str, None, "name of the label column"),
    ("backend", str, "oracle", "step backend: oracle or http"),
    ("model", str, "", "model name for the http backend"),
    ("seed", int, 42, "RNG seed for test-set synthesis"),
    ("chunk_budget", int, 15_000, "token budget per data chunk"),
    ("result_budget", int, None, "token budget for retrieved rows (default: 2x chunk budget)"),
    ("query_max_chars", int, 350, "length cap for generated queries"),
    ("test_fraction", float, 0.20, "per-class test fraction"),
    ("per_class_cap", int, 10, "max synthesized test rows per class"),
    ("parallelism", int, 4, "concurrent backend calls"),
    ("out", str, "runs", "output directory (run) or file (summarize)"),
    ("templates", str, None, "directory overriding the shipped prompt templates"),
]


class CliError(Exception):
    def __init__(self, exit_code: int, message: str) -> None:
        self.exit_code = exit_code
        super().__init__(message)


def _parse_config_file(path: str) -> dict[str, str]:
    """Flat 'key = value' lines; '#' starts a comment; keys match flags."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read config file: {exc}") from exc
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(EXIT_CONFIG, f"{path}:{line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve_settings(args: argparse.Namespace) -> dict:
    file_values = _parse_config_file(args.config) if args.config else {}
    resolved: dict = {}
    for name, typ, default, _ in _SETTINGS:
        value = getattr(args, name, None)
        if value is None:
            env = os.environ.get(ENV_PREFIX + name.upper())
            if env is not None:
                value = env
            elif name in file_values:
                value = file_values[name]
            else:
                value = default
        if value is not None and not isinstance(value, typ):
            try:
                value = typ(value)
            except ValueError as exc:
                raise CliError(EXIT_CONFIG, f"invalid value for {name}: {value!r}") from exc
        resolved[name] = value
    return resolved


def _run_config(settings: dict) -> RunConfig:
    try:
        return RunConfig(
            chunk_budget=settings["chunk_budget"],
            result_budget=settings["result_budget"],
            query_max_chars=settings["query_max_chars"],
            test_fraction=settings["test_fraction"],
            per_class_cap=settings["per_class_cap"],
            rng_seed=settings["seed"],
            parallelism=settings["parallelism"],
        )
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc


def _build_backend(settings: dict):
    if settings["backend"] == "oracle":
        return OracleBackend(query_max_chars=settings["query_max_chars"])
    if settings["backend"] != "http":
        raise CliError(EXIT_CONFIG, f"unknown backend {settings['backend']!r}")
    try:
        endpoint = EndpointConfig.from_env()
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"http backend: {exc}") from exc
    if not settings["model"]:
        raise CliError(EXIT_CONFIG, "http backend requires --model")
    templates = TemplateSet(Path(settings["templates"])) if settings["templates"] else None
    client = ChatClient(endpoint, parallelism=settings["parallelism"])
    return PromptedBackend(client, settings["model"], templates=templates)


def _load_table(settings: dict) -> Table:
    if not settings["data"]:
        raise CliError(EXIT_CONFIG, "--data is required")
    if not settings["label"]:
        raise CliError(EXIT_CONFIG, "--label is required")
    try:
        with open(settings["data"], "r", newline="", encoding="utf-8") as fh:
            return load_csv(fh, settings["label"])
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {settings['data']}: {exc}") from exc
    except MissingLabelColumn as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    except EmptyInput as exc:
        raise CliError(EXIT_SUMMARIZE, str(exc)) from exc
    except TableError as exc:
        raise CliError(EXIT_IO, f"{settings['data']}: {exc}") from exc


def _human_out(quiet: bool):
    return sys.stderr if quiet else sys.stdout


def _print_confusion(matrix: dict[str, dict[str, int]], stream) -> None:
    labels = list(matrix)
    width = max(len(label) for label in labels) + 2
    print("confusion (rows: truth, columns: predicted):", file=stream)
    print(" " * width + "".join(f"{label:>{width}}" for label in labels), file=stream)
    for truth in labels:
        cells = "".join(f"{matrix[truth][pred]:>{width}}" for pred in labels)
        print(f"{truth:>{width}}" + cells, file=stream)


def cmd_run(args: argparse.Namespace) -> int:
    settings = _resolve_settings(args)
    config = _run_config(settings)
    table = _load_table(settings)
    backend = _build_backend(settings)
    dataset_name = Path(settings["data"]).stem
    try:
        report = run(table, backend, config, dataset_name=dataset_name)
    except (SummarizeFailed, MergeFailed, EmptyTable, ChunkingError) as exc:
        raise CliError(EXIT_SUMMARIZE, str(exc)) from exc

    out_dir = Path(settings["out"])
    try:
        header_path, records_path = persist_report(
            report, out_dir / f"{dataset_name}-seed{settings['seed']}"
        )
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write report: {exc}") from exc

    accuracy = report.accuracy
    print(
        f"accuracy: {format_percent(accuracy)} "
        f"({report.correct_count}/{len(report.records)})"
    )
    print(f"report: {header_path}")
    print(f"records: {records_path}")
    human = _human_out(args.quiet)
    _print_confusion(report.confusion, human)
    print("summary:", file=human)
    print(report.summary_text, end="", file=human)
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace) -> int:
    settings = _resolve_settings(args)
    config = _run_config(settings)
    table = _load_table(settings)
    backend = _build_backend(settings)
    try:
        summary = summarize_dataset(table, backend, config)
    except (SummarizeFailed, MergeFailed, EmptyTable, ChunkingError) as exc:
        raise CliError(EXIT_SUMMARIZE, str(exc)) from exc
    text = "<patterns>\n" + render_pattern_table(summary) + "</patterns>\n"
    print(text, end="")
    if args.out is not None:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


def _parse_row_arg(row: str | None, row_file: str | None, table: Table) -> TestRow:
    feature_names = [c.name for c in table.schema.feature_columns]
    values: dict[str, str] = {}
    if row is not None:
        for item in row.split(","):
            if "=" not in item:
                raise CliError(EXIT_CONFIG, f"--row items must be key=value, got {item!r}")
            key, _, value = item.partition("=")
            values[key.strip()] = value.strip()
    elif row_file is not None:
        try:
            with open(row_file, "r", newline="", encoding="utf-8") as fh:
                records = [r for r in csv.reader(fh) if r]
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read {row_file}: {exc}") from exc
        if len(records) < 2:
            raise CliError(EXIT_CONFIG, f"{row_file}: expected a header line and one data row")
        values = dict(zip(records[0], records[1]))
    else:
        raise CliError(EXIT_CONFIG, "one of --row or --row-file is required")
    missing = [name for name in feature_names if name not in values]
    if missing:
        raise CliError(EXIT_CONFIG, f"row is missing feature columns: {missing}")
    return TestRow(values={name: values[name] for name in feature_names}, label="")


def cmd_predict(args: argparse.Namespace) -> int:
    settings = _resolve_settings(args)
    config = _run_config(settings)
    table = _load_table(settings)
    backend = _build_backend(settings)
    test_row = _parse_row_arg(args.row, args.row_file, table)

    if args.summary is not None:
        try:
            text = Path(args.summary).read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read {args.summary}: {exc}") from exc
        if "<patterns>" in text:
            from .prompts import extract_tagged

            text = extract_tagged(text, "patterns")
        try:
            summary = parse_pattern_table(text, settings["label"], list(class_counts(table)))
        except PatternTableError as exc:
            raise CliError(EXIT_CONFIG, f"{args.summary}: {exc}") from exc
    else:
        try:
            summary = summarize_dataset(table, backend, config)
        except (SummarizeFailed, MergeFailed, EmptyTable, ChunkingError) as exc:
            raise CliError(EXIT_SUMMARIZE, str(exc)) from exc

    try:
        retrieval = retrieve_rows(test_row, summary, table, backend, config)
        record = predict_row(test_row, retrieval, summary, table, backend, config)
    except (PredictFailed, OracleError, ParseError) as exc:
        raise CliError(EXIT_SUMMARIZE, str(exc)) from exc
    print(f"query: {record.generated_query}")
    print(
        f"retrieved: {len(record.retrieved_row_indices)} rows "
        f"(attempts: {record.retrieval_attempts}, failed: {record.retrieval_failed})"
    )
    print(f"prediction: {record.predicted_label}")
    print(f"reason: {record.reason}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    for name, typ, _, help_text in _SETTINGS:
        flag = "--" + name.replace("_", "-")
        parser.add_argument(flag, type=typ, default=None, help=help_text)
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument(
        "--quiet", action="store_true", help="send human-oriented tables to stderr"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmldap",
        description="Summarize tabular data per label and classify rows with "
        "retrieval-augmented predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: synthesize, summarize, classify, report")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sum = sub.add_parser("summarize", help="print the final pattern summary")
    _add_common(p_sum)
    p_sum.set_defaults(func=cmd_summarize)

    p_pred = sub.add_parser("predict", help="classify a single row")
    _add_common(p_pred)
    p_pred.add_argument("--row", default=None, help="test row as 'col=value,col=value,...'")
    p_pred.add_argument("--row-file", default=None, help="CSV file with a header and one row")
    p_pred.add_argument("--summary", default=None, help="stored summary file from 'summarize'")
    p_pred.set_defaults(func=cmd_predict)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
