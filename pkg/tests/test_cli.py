from __future__ import annotations

import json
import os

import pytest

from lmldap.cli import main
from lmldap.reporting import load_report

from _datasets import IRIS_PATH


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("LMLDAP_"):
            monkeypatch.delenv(key)


def run_cli(*argv) -> int:
    return main(list(argv))


def test_run_oracle_iris(tmp_path, capsys):
    code = run_cli(
        "run",
        "--data", str(IRIS_PATH),
        "--label", "species",
        "--backend", "oracle",
        "--seed", "42",
        "--out", str(tmp_path),
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "accuracy: 97% (29/30)" in out
    report = load_report(tmp_path / "iris-seed42")
    assert len(report.records) == 30
    assert (tmp_path / "iris-seed42.header.json").exists()
    assert (tmp_path / "iris-seed42.records.jsonl").exists()


def test_run_quiet_moves_tables_to_stderr(tmp_path, capsys):
    code = run_cli(
        "run", "--data", str(IRIS_PATH), "--label", "species",
        "--out", str(tmp_path), "--quiet",
    )
    captured = capsys.readouterr()
    assert code == 0
    assert "accuracy:" in captured.out
    assert "confusion" not in captured.out
    assert "confusion" in captured.err


def test_missing_label_is_config_error(capsys):
    assert run_cli("run", "--data", str(IRIS_PATH)) == 2
    assert "--label is required" in capsys.readouterr().err


def test_unreadable_data_is_io_error(capsys):
    assert run_cli("run", "--data", "/nonexistent/iris.csv", "--label", "species") == 4


def test_wrong_label_name_is_config_error(capsys):
    assert run_cli("run", "--data", str(IRIS_PATH), "--label", "nope") == 2


def test_summarize_prints_tagged_table(capsys):
    code = run_cli("summarize", "--data", str(IRIS_PATH), "--label", "species")
    out = capsys.readouterr().out
    assert code == 0
    assert out.startswith("<patterns>\n")
    assert out.rstrip().endswith("</patterns>")
    assert "4.3-5.8 (avg: 5.01)" in out


def test_summarize_empty_csv_exits_3(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert run_cli("summarize", "--data", str(empty), "--label", "species") == 3


def test_summarize_small_chunks_same_ranges(capsys):
    assert run_cli("summarize", "--data", str(IRIS_PATH), "--label", "species") == 0
    single = capsys.readouterr().out
    assert run_cli(
        "summarize", "--data", str(IRIS_PATH), "--label", "species",
        "--chunk-budget", "100",
    ) == 0
    chunked = capsys.readouterr().out
    for fragment in ("4.3-5.8", "2.3-4.4", "1.0-1.9", "0.1-0.6", "4.9-7.9"):
        assert fragment in single and fragment in chunked


def test_summarize_writes_out_file(tmp_path, capsys):
    out_file = tmp_path / "summary.txt"
    code = run_cli(
        "summarize", "--data", str(IRIS_PATH), "--label", "species", "--out", str(out_file)
    )
    assert code == 0
    assert out_file.read_text() == capsys.readouterr().out


def test_predict_setosa_means(capsys):
    code = run_cli(
        "predict", "--data", str(IRIS_PATH), "--label", "species",
        "--row", "sepal_length=5.01,sepal_width=3.42,petal_length=1.46,petal_width=0.24",
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "prediction: Iris-setosa" in out
    assert "query: `sepal_length` >=" in out


def test_predict_with_stored_summary(tmp_path, capsys):
    summary_file = tmp_path / "summary.txt"
    assert run_cli(
        "summarize", "--data", str(IRIS_PATH), "--label", "species",
        "--out", str(summary_file),
    ) == 0
    capsys.readouterr()
    code = run_cli(
        "predict", "--data", str(IRIS_PATH), "--label", "species",
        "--summary", str(summary_file),
        "--row", "sepal_length=5.0,sepal_width=3.4,petal_length=1.5,petal_width=0.2",
    )
    assert code == 0
    assert "prediction: Iris-setosa" in capsys.readouterr().out


def test_predict_row_missing_feature_is_config_error(capsys):
    code = run_cli(
        "predict", "--data", str(IRIS_PATH), "--label", "species",
        "--row", "sepal_length=5.0",
    )
    assert code == 2
    assert "missing feature columns" in capsys.readouterr().err


def test_predict_row_file(tmp_path, capsys):
    row_file = tmp_path / "row.csv"
    row_file.write_text(
        "sepal_length,sepal_width,petal_length,petal_width\n5.0,3.4,1.5,0.2\n"
    )
    code = run_cli(
        "predict", "--data", str(IRIS_PATH), "--label", "species",
        "--row-file", str(row_file),
    )
    assert code == 0
    assert "prediction: Iris-setosa" in capsys.readouterr().out


def test_http_backend_requires_api_key(capsys):
    code = run_cli(
        "predict", "--data", str(IRIS_PATH), "--label", "species",
        "--backend", "http", "--model", "some-model",
        "--row", "sepal_length=5.0,sepal_width=3.4,petal_length=1.5,petal_width=0.2",
    )
    assert code == 2
    assert "LMLDAP_" in capsys.readouterr().err


def test_precedence_flag_env_file_default(tmp_path, monkeypatch, capsys):
    config_file = tmp_path / "lmldap.conf"
    config_file.write_text("seed = 1\nlabel = species\n")

    # file beats default
    code = run_cli(
        "run", "--data", str(IRIS_PATH), "--config", str(config_file),
        "--out", str(tmp_path / "a"),
    )
    assert code == 0
    assert (tmp_path / "a" / "iris-seed1.header.json").exists()

    # env beats file
    monkeypatch.setenv("LMLDAP_SEED", "2")
    code = run_cli(
        "run", "--data", str(IRIS_PATH), "--config", str(config_file),
        "--out", str(tmp_path / "b"),
    )
    assert code == 0
    assert (tmp_path / "b" / "iris-seed2.header.json").exists()

    # flag beats env
    code = run_cli(
        "run", "--data", str(IRIS_PATH), "--config", str(config_file),
        "--seed", "3", "--out", str(tmp_path / "c"),
    )
    assert code == 0
    assert (tmp_path / "c" / "iris-seed3.header.json").exists()


def test_config_file_syntax_error(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("this is not a key value line\n")
    code = run_cli(
        "run", "--data", str(IRIS_PATH), "--label", "species", "--config", str(bad)
    )
    assert code == 2


def test_invalid_per_class_cap(capsys):
    code = run_cli(
        "run", "--data", str(IRIS_PATH), "--label", "species", "--per-class-cap", "0"
    )
    assert code == 2


def test_missing_subcommand_usage_error():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
