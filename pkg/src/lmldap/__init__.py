"""lmldap: label-pattern summaries plus retrieval-augmented classification.

The pipeline summarizes a tabular training set into one pattern row per
label, then classifies unseen rows by generating a retrieval query against
the training data and predicting from the retrieved rows plus the summary.
Backends are pluggable: a chat-model backend for live use and a
deterministic oracle for offline verification.
"""

__version__ = "0.1.0"

from .backends import OracleBackend, PromptedBackend, StepBackend
from .pipeline import RunConfig, run, summarize_dataset
from .reporting import RunReport, load_report, persist_report
from .table import Table, load_csv, load_csv_text

__all__ = [
    "__version__",
    "OracleBackend",
    "PromptedBackend",
    "StepBackend",
    "RunConfig",
    "run",
    "summarize_dataset",
    "RunReport",
    "load_report",
    "persist_report",
    "Table",
    "load_csv",
    "load_csv_text",
]
