"""Content screening for user inputs and model outputs.

The gate fails closed: if the remote moderation service cannot be reached,
callers must treat the content as flagged. The local-rules mode matches a
deny list of terms on word boundaries so the whole pipeline stays testable
offline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import httpx

__all__ = [
    "ModerationError",
    "ModerationUnavailable",
    "ModerationVerdict",
    "ModerationPolicy",
    "ModerationGate",
    "load_deny_terms",
]

DEFAULT_FALLBACK_INPUT = (
    "I'm sorry, but I can't help with that message. Let's keep our conversation "
    "focused on imagining positive future events."
)
DEFAULT_FALLBACK_OUTPUT = (
    "I'm sorry, I wasn't able to produce a reply for that. Let's try again with "
    "the current question."
)


class ModerationError(Exception):
    pass


class ModerationUnavailable(ModerationError):
    """Remote moderation endpoint failed; callers must treat as flagged."""


@dataclass(frozen=True)
class ModerationVerdict:
    flagged: bool
    categories: dict[str, bool]
    scores: dict[str, float]

    def __post_init__(self) -> None:
        if self.flagged != any(self.categories.values()):
            raise ValueError("flagged must equal 'any category is true'")

    @classmethod
    def clean(cls) -> ModerationVerdict:
        return cls(flagged=False, categories={}, scores={})

    def to_dict(self) -> dict:
        return {
            "flagged": self.flagged,
            "categories": dict(self.categories),
            "scores": dict(self.scores),
        }


@dataclass(frozen=True)
class ModerationPolicy:
    """Where verdicts come from and what to say when content is blocked."""

    mode: str = "local"  # "local" or "remote"
    term_list_path: str | None = None
    endpoint_url: str | None = None
    fallback_input_reply: str = DEFAULT_FALLBACK_INPUT
    fallback_output_reply: str = DEFAULT_FALLBACK_OUTPUT

    def __post_init__(self) -> None:
        if self.mode not in ("local", "remote"):
            raise ValueError("moderation mode must be 'local' or 'remote'")
        if self.mode == "remote" and not self.endpoint_url:
            raise ValueError("remote moderation requires an endpoint_url")
        if not self.fallback_input_reply.strip() or not self.fallback_output_reply.strip():
            raise ValueError("fallback replies must be non-empty")


def load_deny_terms(path: str | Path | None = None) -> list[str]:
    """Read the deny list: one term per line, '#' comments, UTF-8."""
    if path is None:
        text = resources.files("eftchat").joinpath("data", "deny_terms.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    terms = []
    for line in text.splitlines():
        term = line.split("#", 1)[0].strip()
        if term:
            terms.append(term)
    return terms


class ModerationGate:
    """Screens text before it reaches the model or the user."""

    def __init__(
        self,
        policy: ModerationPolicy | None = None,
        client: httpx.Client | None = None,
        retry_limit: int = 2,
    ):
        self.policy = policy or ModerationPolicy()
        self._retry_limit = retry_limit
        self._client = client
        self._patterns: list[tuple[str, re.Pattern[str]]] = []
        if self.policy.mode == "local":
            for term in load_deny_terms(self.policy.term_list_path):
                pattern = re.compile(rf"\b{re.escape(term)}\b", re.IGNORECASE)
                self._patterns.append((term, pattern))

    def screen_input(self, text: str) -> ModerationVerdict:
        return self._screen(text)

    def screen_output(self, text: str) -> ModerationVerdict:
        # Same contract as screen_input today; kept separate so input and
        # output policies may diverge without touching callers.
        return self._screen(text)

    def _screen(self, text: str) -> ModerationVerdict:
        if not text:
            return ModerationVerdict.clean()
        if self.policy.mode == "local":
            return self._screen_local(text)
        return self._screen_remote(text)

    def _screen_local(self, text: str) -> ModerationVerdict:
        categories: dict[str, bool] = {}
        scores: dict[str, float] = {}
        for term, pattern in self._patterns:
            if pattern.search(text):
                categories[term] = True
                scores[term] = 1.0
        return ModerationVerdict(flagged=bool(categories), categories=categories, scores=scores)

    def _screen_remote(self, text: str) -> ModerationVerdict:
        client = self._client or httpx.Client(timeout=10.0)
        last_error: Exception | None = None
        for _ in range(self._retry_limit + 1):
            try:
                response = client.post(self.policy.endpoint_url, json={"input": text})
                if response.status_code >= 500:
                    last_error = ModerationUnavailable(f"status {response.status_code}")
                    continue
                payload = response.json()
                result = payload["results"][0]
                categories = {str(k): bool(v) for k, v in result["categories"].items()}
                scores = {str(k): float(v) for k, v in result.get("category_scores", {}).items()}
                flagged = bool(result["flagged"]) or any(categories.values())
                if flagged and not any(categories.values()):
                    # Endpoint flagged without naming a category; keep the
                    # verdict invariant by recording an unspecified one.
                    categories["unspecified"] = True
                return ModerationVerdict(flagged=flagged, categories=categories, scores=scores)
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
        raise ModerationUnavailable(f"moderation endpoint failed: {last_error}")
