"""The four-step semantic interface the pipeline drives.

Implementations return raw response text; the pipeline owns tag extraction
and parsing, so prompted and deterministic backends flow through the same
validation path.
"""

from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

__all__ = ["StepBackend"]


@runtime_checkable
class StepBackend(Protocol):
    def summarize_chunk(
        self, chunk_csv: str, label_column: str, labels: Sequence[str]
    ) -> str:
        """Raw response holding a <patterns> table for one data chunk."""
        ...

    def merge_summaries(
        self, summaries: Sequence[str], label_column: str, labels: Sequence[str]
    ) -> str:
        """Raw response combining rendered summaries into one <patterns> table."""
        ...

    def generate_query(
        self,
        dtypes_text: str,
        summary_text: str,
        test_row_text: str,
        columns: Sequence[str],
        failed_query: str | None = None,
    ) -> str:
        """Raw response holding a <dfquery> retrieval expression."""
        ...

    def predict(
        self,
        sample_rows_text: str,
        summary_text: str,
        test_row_text: str,
        labels: Sequence[str],
    ) -> str:
        """Raw response holding <prediction> and <reason> tags."""
        ...
