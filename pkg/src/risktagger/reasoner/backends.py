"""Reasoning backend port and the live chat-completions adapter.

A backend is anything with complete(prompt, temperature, max_tokens) -> str
and a stable `name` tag that ends up in every assessment it produced. The
deterministic rule engine lives in rules.py; this module holds the protocol
and the HTTP adapter for a hosted model.
"""

from __future__ import annotations

import os
import time
from typing import Protocol, runtime_checkable

import requests

from ..errors import BackendFailure

LLM_ENDPOINT_ENV = "RISKTAGGER_LLM_ENDPOINT"
LLM_KEY_ENV = "RISKTAGGER_LLM_KEY"

DEFAULT_TEMPERATURE = 0.3
DEFAULT_MAX_TOKENS = 2048


@runtime_checkable
class BackendPort(Protocol):
    name: str

    def complete(self, prompt: str, temperature: float, max_tokens: int) -> str: ...


class HttpLlmBackend:
    """Chat-completions adapter; the endpoint must accept an OpenAI-style POST."""

    name = "llm"

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str = "default",
        session: requests.Session | None = None,
        retry_attempts: int = 3,
        backoff_base_s: float = 1.0,
        timeout_s: float = 120.0,
    ):
        self.endpoint = endpoint or os.environ.get(LLM_ENDPOINT_ENV, "")
        self.api_key = api_key if api_key is not None else os.environ.get(LLM_KEY_ENV, "")
        if not self.endpoint:
            raise BackendFailure(f"no LLM endpoint configured (flag, config, or {LLM_ENDPOINT_ENV})")
        self.model = model
        self.session = session or requests.Session()
        self.retry_attempts = retry_attempts
        self.backoff_base_s = backoff_base_s
        self.timeout_s = timeout_s

    def complete(self, prompt: str, temperature: float, max_tokens: int) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_err = None
        for attempt in range(self.retry_attempts):
            if attempt:
                time.sleep(self.backoff_base_s * (2 ** (attempt - 1)))
            try:
                resp = self.session.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_err = exc
                continue
            if resp.status_code in (429,) or resp.status_code >= 500:
                last_err = BackendFailure(f"LLM endpoint returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendFailure(
                    f"LLM endpoint returned {resp.status_code}: {resp.text[:200]}"
                )
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendFailure(f"malformed completion response: {exc}") from exc
            if not content:
                raise BackendFailure("empty completion")
            return content
        raise BackendFailure(
            f"LLM endpoint unreachable after {self.retry_attempts} attempts: {last_err}"
        )
