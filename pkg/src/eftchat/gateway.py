"""Single choke point for chat-model calls.

All model traffic flows through :class:`LlmGateway`: it enforces the token
budget, applies the retry policy for remote transports, and keeps an ordered
log of every request so tests can audit exactly what reached the provider.
Three provider kinds are supported: a remote HTTP chat-completion endpoint,
a deterministic scripted playback provider for offline runs, and an echo
provider.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol

import httpx

from .domain import ChatMessage, Role, token_estimate

__all__ = [
    "GatewayError",
    "TransportError",
    "BudgetExceeded",
    "ProviderRefusal",
    "ScriptError",
    "ProviderRequest",
    "ProviderResponse",
    "EchoProvider",
    "ScriptedProvider",
    "RemoteProvider",
    "LlmGateway",
    "token_estimate",
]

FINISH_REASONS = ("stop", "length", "filtered")


class GatewayError(Exception):
    """Base class for gateway failures."""


class TransportError(GatewayError):
    """Network-level failure talking to a provider, after retries."""

    def __init__(self, message: str, *, transient: bool = False):
        super().__init__(message)
        self.transient = transient


class BudgetExceeded(GatewayError):
    """Request would not fit the model's context budget."""


class ProviderRefusal(GatewayError):
    """The provider filtered the completion instead of answering."""


class ScriptError(GatewayError):
    """A scripted provider had no entry for the incoming request."""


@dataclass(frozen=True)
class ProviderRequest:
    """One chat-completion request.

    ``stage_tag`` names the interview/evaluation step issuing the call; the
    scripted provider keys its playback on it so response scripts survive
    prompt-wording edits.
    """

    model_name: str
    messages: tuple[ChatMessage, ...]
    temperature: float
    max_output_tokens: int
    stage_tag: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("request must contain at least one message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        object.__setattr__(self, "messages", tuple(self.messages))

    def input_tokens(self) -> int:
        return sum(m.token_estimate for m in self.messages)


@dataclass(frozen=True)
class ProviderResponse:
    content: str
    finish_reason: str
    usage: dict[str, int] | None = None

    def __post_init__(self) -> None:
        if self.finish_reason not in FINISH_REASONS:
            raise ValueError(f"finish_reason must be one of {FINISH_REASONS}")
        if not self.content and self.finish_reason != "filtered":
            raise ValueError("content may be empty only when filtered")


class Provider(Protocol):
    kind: str

    def send(self, request: ProviderRequest) -> ProviderResponse: ...


class EchoProvider:
    """Replays the last user message back; handy for manual smoke runs."""

    kind = "echo"

    def send(self, request: ProviderRequest) -> ProviderResponse:
        for message in reversed(request.messages):
            if message.role is Role.USER:
                return ProviderResponse(content=message.content, finish_reason="stop")
        return ProviderResponse(content="(no user message)", finish_reason="stop")


@dataclass(frozen=True)
class ScriptEntry:
    stage: str
    ordinal: int
    content: str
    finish_reason: str = "stop"


class ScriptedProvider:
    """Deterministic playback provider keyed by (stage tag, call ordinal).

    Each incoming request increments a per-stage counter; the entry whose
    (stage, ordinal) matches is returned. A stage of ``"*"`` matches requests
    whose stage has no dedicated entries, and an ordinal of ``-1`` matches
    every call for its stage, which makes one-line scripts possible.
    """

    kind = "scripted"

    def __init__(self, entries: list[ScriptEntry]):
        self._entries: dict[tuple[str, int], ScriptEntry] = {}
        self._sticky: dict[str, ScriptEntry] = {}
        for entry in entries:
            if entry.ordinal < 0:
                self._sticky[entry.stage] = entry
            else:
                key = (entry.stage, entry.ordinal)
                if key in self._entries:
                    raise ValueError(f"duplicate script entry for {key}")
                self._entries[key] = entry
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def single(cls, content: str, finish_reason: str = "stop") -> ScriptedProvider:
        return cls([ScriptEntry(stage="*", ordinal=-1, content=content, finish_reason=finish_reason)])

    @classmethod
    def from_file(cls, path: str | Path) -> ScriptedProvider:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, list):
            raise ValueError("provider script must be a JSON array")
        entries = [
            ScriptEntry(
                stage=item["stage"],
                ordinal=int(item["ordinal"]),
                content=item["content"],
                finish_reason=item.get("finish_reason", "stop"),
            )
            for item in raw
        ]
        return cls(entries)

    def _lookup(self, stage: str, ordinal: int) -> ScriptEntry | None:
        entry = self._entries.get((stage, ordinal))
        if entry is not None:
            return entry
        if stage in self._sticky:
            return self._sticky[stage]
        has_stage = any(key[0] == stage for key in self._entries)
        if not has_stage:
            entry = self._entries.get(("*", ordinal))
            if entry is not None:
                return entry
            return self._sticky.get("*")
        return None

    def send(self, request: ProviderRequest) -> ProviderResponse:
        stage = request.stage_tag or "*"
        with self._lock:
            ordinal = self._counters.get(stage, 0)
            self._counters[stage] = ordinal + 1
        entry = self._lookup(stage, ordinal)
        if entry is None:
            raise ScriptError(f"no scripted reply for stage={stage!r} ordinal={ordinal}")
        return ProviderResponse(content=entry.content, finish_reason=entry.finish_reason)


class RemoteProvider:
    """HTTP chat-completion provider.

    Wire format: POST ``{model, messages: [{role, content}], temperature,
    max_tokens}``; the reply must carry ``choices[0].message.content`` and
    ``choices[0].finish_reason``. The bearer credential is read from the
    environment variable named at construction, never stored.
    """

    kind = "remote"

    def __init__(
        self,
        endpoint_url: str,
        credential_env: str = "EFTCHAT_API_KEY",
        timeout: float = 30.0,
        client: httpx.Client | None = None,
    ):
        self.endpoint_url = endpoint_url
        self.credential_env = credential_env
        self._client = client or httpx.Client(timeout=timeout)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        credential = os.environ.get(self.credential_env)
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        return headers

    def send(self, request: ProviderRequest) -> ProviderResponse:
        body = {
            "model": request.model_name,
            "messages": [
                {"role": m.role.value, "content": m.content} for m in request.messages
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        try:
            response = self._client.post(self.endpoint_url, json=body, headers=self._headers())
        except httpx.HTTPError as exc:
            raise TransportError(f"request failed: {exc}", transient=True) from exc
        if response.status_code >= 500:
            raise TransportError(f"server error {response.status_code}", transient=True)
        if response.status_code >= 400:
            raise TransportError(f"client error {response.status_code}: {response.text[:200]}")
        try:
            payload = response.json()
            choice = payload["choices"][0]
            content = choice["message"]["content"] or ""
            finish = choice.get("finish_reason", "stop")
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed provider response: {exc}") from exc
        if finish in ("content_filter", "filtered"):
            finish = "filtered"
        elif finish not in FINISH_REASONS:
            finish = "stop"
        usage = payload.get("usage")
        parsed_usage = None
        if isinstance(usage, dict):
            parsed_usage = {
                "input_tokens": int(usage.get("prompt_tokens", 0)),
                "output_tokens": int(usage.get("completion_tokens", 0)),
            }
        return ProviderResponse(content=content, finish_reason=finish, usage=parsed_usage)


@dataclass
class RetryPolicy:
    retry_limit: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0

    def delay(self, attempt: int) -> float:
        return min(self.backoff_base * (2**attempt), self.backoff_cap)


class LlmGateway:
    """Budget guard, retry loop and call log around one provider."""

    def __init__(
        self,
        provider: Provider,
        context_budget: int = 8192,
        retry: RetryPolicy | None = None,
        log_calls: bool = True,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.provider = provider
        self.context_budget = context_budget
        self.retry = retry or RetryPolicy()
        self._log_calls = log_calls
        self._sleep = sleep
        self._log: list[ProviderRequest] = []
        self._log_lock = threading.Lock()

    @property
    def provider_kind(self) -> str:
        return getattr(self.provider, "kind", "unknown")

    def record_call_log(self) -> list[ProviderRequest]:
        """Every request seen by the provider, in call order."""
        with self._log_lock:
            return list(self._log)

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        if request.input_tokens() + request.max_output_tokens > self.context_budget:
            raise BudgetExceeded(
                f"{request.input_tokens()} input + {request.max_output_tokens} output "
                f"tokens exceed budget {self.context_budget}"
            )
        if self._log_calls:
            with self._log_lock:
                self._log.append(request)
        attempt = 0
        while True:
            try:
                response = self.provider.send(request)
                break
            except TransportError as exc:
                if not exc.transient or attempt >= self.retry.retry_limit:
                    raise
                self._sleep(self.retry.delay(attempt))
                attempt += 1
        if response.finish_reason == "filtered":
            raise ProviderRefusal("provider filtered the completion")
        return response
