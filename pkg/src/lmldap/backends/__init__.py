from .base import StepBackend
from .chat import (
    ENV_API_KEY,
    ENV_BASE_URL,
    BackendError,
    ChatClient,
    ChatMessage,
    ChatRequest,
    EndpointConfig,
    ExhaustedRetries,
    HttpStatusError,
    NetworkError,
    PromptedBackend,
    ProtocolError,
    RateLimitedError,
    RetryPolicy,
)
from .oracle import (
    IncompatibleParts,
    NoNumericColumns,
    OracleBackend,
    OracleError,
    oracle_merge,
    oracle_predict,
    oracle_query,
    oracle_summarize,
    summarize_table,
)

__all__ = [
    "StepBackend",
    "ENV_API_KEY",
    "ENV_BASE_URL",
    "BackendError",
    "ChatClient",
    "ChatMessage",
    "ChatRequest",
    "EndpointConfig",
    "ExhaustedRetries",
    "HttpStatusError",
    "NetworkError",
    "PromptedBackend",
    "ProtocolError",
    "RateLimitedError",
    "RetryPolicy",
    "IncompatibleParts",
    "NoNumericColumns",
    "OracleBackend",
    "OracleError",
    "oracle_merge",
    "oracle_predict",
    "oracle_query",
    "oracle_summarize",
    "summarize_table",
]
