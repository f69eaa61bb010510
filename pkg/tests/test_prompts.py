from __future__ import annotations

from pathlib import Path

import pytest

from lmldap.prompts import (
    TEMPLATE_NAMES,
    MissingPlaceholder,
    TagMissing,
    TagUnclosed,
    TemplateSet,
    extract_tagged,
    render_prompt,
)

GOLDEN_DIR = Path(__file__).parent / "data" / "golden_prompts"

SENTINELS = {
    "summarize_chunk": {
        "train data chunk": "[TRAIN-DATA-CHUNK]",
        "label column": "[LABEL-COLUMN]",
        "available labels": "[AVAILABLE-LABELS]",
    },
    "merge_summaries": {
        "all summaries": "[ALL-SUMMARIES]",
        "label column": "[LABEL-COLUMN]",
        "available labels": "[AVAILABLE-LABELS]",
    },
    "generate_query": {
        "dtypes data": "[DTYPES-DATA]",
        "summary data": "[SUMMARY-DATA]",
        "test df": "[TEST-DF]",
        "available columns": "[AVAILABLE-COLUMNS]",
    },
    "generate_query_retry": {
        "dtypes data": "[DTYPES-DATA]",
        "summary data": "[SUMMARY-DATA]",
        "test df": "[TEST-DF]",
        "available columns": "[AVAILABLE-COLUMNS]",
        "df_query": "[DF-QUERY]",
    },
    "predict": {
        "query result": "[QUERY-RESULT]",
        "summary data": "[SUMMARY-DATA]",
        "test data": "[TEST-DATA]",
        "available labels": "[AVAILABLE-LABELS]",
    },
}


@pytest.mark.parametrize("name", TEMPLATE_NAMES)
def test_rendered_templates_match_golden_files(name):
    rendered = render_prompt(name, SENTINELS[name])
    golden = (GOLDEN_DIR / f"{name}.txt").read_text(encoding="utf-8")
    assert rendered == golden


def test_summarize_prompt_contains_role_line():
    rendered = render_prompt("summarize_chunk", SENTINELS["summarize_chunk"])
    assert "Act as an Explainable Machine Learning Model. Don't write code.\n" in rendered


def test_predict_prompt_contains_tag_instruction():
    rendered = render_prompt("predict", SENTINELS["predict"])
    assert "between tags <prediction> and </prediction>" in rendered


def test_retry_prompt_quotes_failed_query():
    context = dict(SENTINELS["generate_query_retry"])
    context["df_query"] = "petal_width > 9"
    rendered = render_prompt("generate_query_retry", context)
    assert "Last query that returned empty response: 'petal_width > 9'" in rendered


def test_missing_placeholder():
    with pytest.raises(MissingPlaceholder) as err:
        render_prompt("summarize_chunk", {"label column": "species"})
    assert err.value.name == "train data chunk"


def test_directory_override(tmp_path):
    (tmp_path / "summarize_chunk.txt").write_text("custom {label column}\n", encoding="utf-8")
    templates = TemplateSet(directory=tmp_path)
    assert templates.render("summarize_chunk", {"label column": "y"}) == "custom y\n"


def test_extract_simple():
    assert extract_tagged("<prediction> Iris-setosa </prediction>", "prediction") == "Iris-setosa"


def test_extract_takes_first_occurrence():
    text = "<dfquery>first</dfquery> noise <dfquery>second</dfquery>"
    assert extract_tagged(text, "dfquery") == "first"


def test_extract_missing_tag():
    with pytest.raises(TagMissing):
        extract_tagged("no tags here", "prediction")


def test_extract_unclosed_tag():
    with pytest.raises(TagUnclosed):
        extract_tagged("<prediction> Iris", "prediction")


def test_extract_strips_code_fence():
    text = "<patterns>\n```csv\na,b\n1,2\n```\n</patterns>"
    assert extract_tagged(text, "patterns") == "a,b\n1,2"


def test_extract_strips_bare_fence():
    text = "<patterns>\n```\npayload\n```\n</patterns>"
    assert extract_tagged(text, "patterns") == "payload"
