"""Chat-completions HTTP transport shared by every LLM-backed component."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import httpx

log = logging.getLogger(__name__)

BASE_URL_ENV = "EQNEG_BASE_URL"
API_KEY_ENV = "EQNEG_API_KEY"
REDACTED = "***"


class BackendError(RuntimeError):
    """An agent backend could not produce a message."""


class LLMTimeoutError(BackendError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str | None = None
    model: str = "gpt-4o-mini"
    api_key_env: str = API_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 2
    backoff: float = 0.5
    backoff_cap: float = 8.0
    capture_path: str | None = None
    extra_headers: dict[str, str] = field(default_factory=dict)

    def resolved_base_url(self) -> str:
        return (self.base_url or os.environ.get(BASE_URL_ENV) or "http://localhost:8000/v1").rstrip("/")

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) or None

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> EndpointConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown endpoint fields: {sorted(unknown)}")
        return cls(**doc)


def redact(obj: Any, secrets: Sequence[str]) -> Any:
    """Replace secret values (and any Authorization header) in a JSON-like object."""
    if isinstance(obj, dict):
        return {
            k: (REDACTED if k.lower() == "authorization" else redact(v, secrets))
            for k, v in obj.items()
        }
    if isinstance(obj, list):
        return [redact(v, secrets) for v in obj]
    if isinstance(obj, str):
        for s in secrets:
            if s:
                obj = obj.replace(s, REDACTED)
        return obj
    return obj


_capture_lock = threading.Lock()


def _capture(path: str, record: dict) -> None:
    with _capture_lock, open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def chat_complete(
    endpoint: EndpointConfig,
    messages: Sequence[dict[str, str]],
    temperature: float = 0.0,
    max_tokens: int = 512,
    seed: int | None = None,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """POST a chat-completions request and return the assistant text.

    Retries connection errors, timeouts, 429 and 5xx responses up to
    ``endpoint.max_retries`` times with capped exponential backoff. Other 4xx
    responses fail immediately.
    """
    for m in messages:
        if not isinstance(m, dict) or "role" not in m or "content" not in m:
            raise ValueError("messages must be dicts with 'role' and 'content'")

    url = f"{endpoint.resolved_base_url()}/chat/completions"
    key = endpoint.api_key()
    headers = {"Content-Type": "application/json", **endpoint.extra_headers}
    if key:
        headers["Authorization"] = f"Bearer {key}"
    payload: dict[str, Any] = {
        "model": endpoint.model,
        "messages": list(messages),
        "temperature": temperature,
        "max_tokens": max_tokens,
    }
    if seed is not None:
        payload["seed"] = seed
    secrets = [key] if key else []
    log.debug("chat request %s", json.dumps(redact({"url": url, "headers": headers, "body": payload}, secrets)))

    own_client = client is None
    client = client or httpx.Client(timeout=endpoint.timeout)
    last_error: BaseException | None = None
    try:
        for attempt in range(endpoint.max_retries + 1):
            if attempt:
                delay = min(endpoint.backoff * 2 ** (attempt - 1), endpoint.backoff_cap)
                log.info("retrying chat request (attempt %d) after %.2fs: %s", attempt + 1, delay, last_error)
                sleep(delay)
            try:
                resp = client.post(url, json=payload, headers=headers, timeout=endpoint.timeout)
            except httpx.TimeoutException as exc:
                last_error = exc
                continue
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = BackendError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {redact(resp.text[:200], secrets)}")
            try:
                text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"malformed chat response: {exc}") from None
            if not isinstance(text, str) or not text.strip():
                raise BackendError("empty chat response")
            log.debug("chat response %s", redact(text, secrets))
            if endpoint.capture_path:
                _capture(endpoint.capture_path, redact({"request": payload, "response": text}, secrets))
            return text
    finally:
        if own_client:
            client.close()

    attempts = endpoint.max_retries + 1
    if isinstance(last_error, httpx.TimeoutException):
        raise LLMTimeoutError(f"chat request timed out after {attempts} attempts")
    raise BackendError(f"chat request failed after {attempts} attempts: {redact(str(last_error), secrets)}")
