"""Chat-completions transport and the prompted step backend.

The client POSTs ``{"model", "messages", "temperature"}`` JSON to a single
configured URL with bearer-token auth, reads
``choices[0].message.content``, and retries retryable failures with
exponential backoff, honoring a server-provided Retry-After.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import httpx

from ..prompts import TemplateSet

__all__ = [
    "ENV_API_KEY",
    "ENV_BASE_URL",
    "ChatMessage",
    "ChatRequest",
    "BackendError",
    "NetworkError",
    "HttpStatusError",
    "RateLimitedError",
    "ProtocolError",
    "ExhaustedRetries",
    "RetryPolicy",
    "EndpointConfig",
    "ChatClient",
    "PromptedBackend",
]

logger = logging.getLogger(__name__)

ENV_API_KEY = "LMLDAP_API_KEY"
ENV_BASE_URL = "LMLDAP_BASE_URL"


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_output_tokens: int | None = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def body(self) -> dict:
        payload = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
        }
        if self.max_output_tokens is not None:
            payload["max_tokens"] = self.max_output_tokens
        return payload


class BackendError(Exception):
    kind = "backend"


class NetworkError(BackendError):
    kind = "network"


class HttpStatusError(BackendError):
    def __init__(self, code: int, detail: str = "") -> None:
        self.code = code
        super().__init__(f"HTTP {code}{': ' + detail if detail else ''}")

    @property
    def kind(self) -> str:  # type: ignore[override]
        return "http_5xx" if self.code >= 500 else "http_4xx"


class RateLimitedError(BackendError):
    kind = "rate_limited"

    def __init__(self, retry_after: float | None = None) -> None:
        self.retry_after = retry_after
        super().__init__(
            "rate limited" + (f", retry after {retry_after}s" if retry_after else "")
        )


class ProtocolError(BackendError):
    kind = "protocol"

    def __init__(self, detail: str) -> None:
        super().__init__(f"malformed response: {detail}")


class ExhaustedRetries(BackendError):
    kind = "exhausted"

    def __init__(self, attempts: int, last: BackendError) -> None:
        self.attempts = attempts
        self.last = last
        super().__init__(f"gave up after {attempts} attempts: {last}")


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_delay: float = 1.0
    backoff_factor: float = 2.0
    retryable: frozenset[str] = frozenset({"network", "http_5xx", "rate_limited"})

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.backoff_factor < 1:
            raise ValueError("backoff_factor must be >= 1")

    def is_retryable(self, err: BackendError) -> bool:
        return err.kind in self.retryable

    def delay(self, attempt: int) -> float:
        return self.base_delay * self.backoff_factor**attempt


DEFAULT_RETRY_POLICY = RetryPolicy()


@dataclass(frozen=True)
class EndpointConfig:
    """Where to POST chat requests. The URL is used exactly as given."""

    url: str
    api_key: str
    timeout: float = 120.0

    @classmethod
    def from_env(cls, timeout: float = 120.0) -> "EndpointConfig":
        url = os.environ.get(ENV_BASE_URL, "")
        key = os.environ.get(ENV_API_KEY, "")
        if not url:
            raise ValueError(f"{ENV_BASE_URL} is not set")
        if not key:
            raise ValueError(f"{ENV_API_KEY} is not set")
        return cls(url=url, api_key=key, timeout=timeout)


class ChatClient:
    """Thread-safe chat-completions client with bounded parallelism.

    *transport* and *sleep* are injectable for tests (counting fakes,
    instant backoff).
    """

    def __init__(
        self,
        endpoint: EndpointConfig,
        parallelism: int = 4,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.endpoint = endpoint
        self._semaphore = threading.Semaphore(parallelism)
        self._client = httpx.Client(transport=transport, timeout=endpoint.timeout)
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def _post_once(self, request: ChatRequest) -> str:
        headers = {"Authorization": f"Bearer {self.endpoint.api_key}"}
        try:
            with self._semaphore:
                response = self._client.post(
                    self.endpoint.url, json=request.body(), headers=headers
                )
        except httpx.HTTPError as exc:
            raise NetworkError(str(exc)) from exc
        if response.status_code == 429:
            retry_after = response.headers.get("retry-after")
            raise RateLimitedError(float(retry_after) if retry_after else None)
        if not 200 <= response.status_code < 300:
            raise HttpStatusError(response.status_code, response.text[:200])
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise ProtocolError(str(exc)) from exc
        if not isinstance(content, str):
            raise ProtocolError("message content is not text")
        return content

    def complete(self, request: ChatRequest, policy: RetryPolicy = DEFAULT_RETRY_POLICY) -> str:
        """First choice's message content, after policy-driven retries."""
        last: BackendError | None = None
        for attempt in range(policy.max_attempts):
            try:
                return self._post_once(request)
            except BackendError as err:
                last = err
                if not policy.is_retryable(err):
                    raise
                if attempt + 1 >= policy.max_attempts:
                    break
                delay = policy.delay(attempt)
                if isinstance(err, RateLimitedError) and err.retry_after is not None:
                    delay = err.retry_after
                logger.warning("chat request failed (%s); retrying in %.1fs", err, delay)
                self._sleep(delay)
        assert last is not None
        raise ExhaustedRetries(policy.max_attempts, last)


class PromptedBackend:
    """Step backend that renders the shipped prompts and asks a chat model.

    Each step is sent as a single user message at the configured
    temperature (0 by default, for reproducibility).
    """

    def __init__(
        self,
        client: ChatClient,
        model: str,
        temperature: float = 0.0,
        templates: TemplateSet | None = None,
        policy: RetryPolicy = DEFAULT_RETRY_POLICY,
    ) -> None:
        self.client = client
        self.model = model
        self.temperature = temperature
        self.templates = templates or TemplateSet()
        self.policy = policy

    def _ask(self, prompt: str) -> str:
        request = ChatRequest(
            model=self.model,
            messages=(ChatMessage("user", prompt),),
            temperature=self.temperature,
        )
        return self.client.complete(request, self.policy)

    def summarize_chunk(
        self, chunk_csv: str, label_column: str, labels: Sequence[str]
    ) -> str:
        prompt = self.templates.render(
            "summarize_chunk",
            {
                "train data chunk": chunk_csv,
                "label column": label_column,
                "available labels": ", ".join(labels),
            },
        )
        return self._ask(prompt)

    def merge_summaries(
        self, summaries: Sequence[str], label_column: str, labels: Sequence[str]
    ) -> str:
        prompt = self.templates.render(
            "merge_summaries",
            {
                "all summaries": "\n\n".join(summaries),
                "label column": label_column,
                "available labels": ", ".join(labels),
            },
        )
        return self._ask(prompt)

    def generate_query(
        self,
        dtypes_text: str,
        summary_text: str,
        test_row_text: str,
        columns: Sequence[str],
        failed_query: str | None = None,
    ) -> str:
        context = {
            "dtypes data": dtypes_text,
            "summary data": summary_text,
            "test df": test_row_text,
            "available columns": ", ".join(columns),
        }
        if failed_query is None:
            prompt = self.templates.render("generate_query", context)
        else:
            context["df_query"] = failed_query
            prompt = self.templates.render("generate_query_retry", context)
        return self._ask(prompt)

    def predict(
        self,
        sample_rows_text: str,
        summary_text: str,
        test_row_text: str,
        labels: Sequence[str],
    ) -> str:
        prompt = self.templates.render(
            "predict",
            {
                "query result": sample_rows_text,
                "summary data": summary_text,
                "test data": test_row_text,
                "available labels": ", ".join(labels),
            },
        )
        return self._ask(prompt)
