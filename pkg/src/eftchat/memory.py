"""Conversation memory with a token budget and summary rollover.

Keeps the rendered history within ``budget - reserve`` estimated tokens.
When an append pushes past the bound, the oldest turns are folded into a
running summary by one summarizer call; the newest ``keep_last`` turns
always survive verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .domain import ChatMessage, Role
from .gateway import GatewayError, LlmGateway, ProviderRequest

__all__ = [
    "ConversationMemoryError",
    "SummarizationFailed",
    "MemoryOverflow",
    "MemoryState",
    "MemoryManager",
    "SUMMARIZER_INSTRUCTION",
]

SUMMARIZER_INSTRUCTION = (
    "Summarize the following interview turns, preserving the event "
    "descriptions, details (who/what/where/feeling), and any ratings given."
)

DEFAULT_BUDGET_TOKENS = 8192
DEFAULT_RESERVE_TOKENS = 512
DEFAULT_KEEP_LAST = 6


class ConversationMemoryError(Exception):
    pass


class SummarizationFailed(ConversationMemoryError):
    """The summarizer call failed; the memory state is unchanged."""


class MemoryOverflow(ConversationMemoryError):
    """Even maximal rollover cannot satisfy the token bound."""


@dataclass(frozen=True)
class MemoryState:
    system_message: ChatMessage
    summary: ChatMessage | None = None
    recent: tuple[ChatMessage, ...] = field(default_factory=tuple)
    budget_tokens: int = DEFAULT_BUDGET_TOKENS
    reserve_tokens: int = DEFAULT_RESERVE_TOKENS

    def __post_init__(self) -> None:
        if self.budget_tokens <= 0 or self.reserve_tokens <= 0:
            raise ValueError("budget_tokens and reserve_tokens must be positive")
        object.__setattr__(self, "recent", tuple(self.recent))

    def render(self) -> list[ChatMessage]:
        """System message, then the summary if present, then recent turns."""
        rendered = [self.system_message]
        if self.summary is not None:
            rendered.append(self.summary)
        rendered.extend(self.recent)
        return rendered

    def rendered_tokens(self) -> int:
        return sum(m.token_estimate for m in self.render())

    @property
    def limit(self) -> int:
        return self.budget_tokens - self.reserve_tokens


class MemoryManager:
    """Applies the budget policy; holds the summarizer wiring."""

    def __init__(
        self,
        gateway: LlmGateway,
        model_name: str = "gpt-4",
        keep_last: int = DEFAULT_KEEP_LAST,
        summary_max_tokens: int = 256,
    ):
        self.gateway = gateway
        self.model_name = model_name
        self.keep_last = keep_last
        self.summary_max_tokens = summary_max_tokens

    def append(self, state: MemoryState, message: ChatMessage) -> MemoryState:
        """Append and roll over as many times as needed to hold the bound."""
        new_state = replace(state, recent=state.recent + (message,))
        while new_state.rendered_tokens() > new_state.limit:
            if len(new_state.recent) <= self.keep_last:
                raise MemoryOverflow(
                    f"cannot fit within {new_state.limit} tokens with the newest "
                    f"{self.keep_last} turns kept verbatim"
                )
            new_state = self.rollover(new_state)
        return new_state

    def rollover(self, state: MemoryState) -> MemoryState:
        """Fold all but the newest ``keep_last`` turns into the summary."""
        if len(state.recent) < self.keep_last + 1:
            raise ValueError(
                f"rollover needs more than keep_last={self.keep_last} recent messages"
            )
        evicted = state.recent[: -self.keep_last]
        kept = state.recent[-self.keep_last :]
        summary_text = self._summarize(state.summary, evicted)
        summary_message = ChatMessage(role=Role.ASSISTANT, content=summary_text)
        return replace(state, summary=summary_message, recent=kept)

    def _summarize(
        self, prior_summary: ChatMessage | None, evicted: tuple[ChatMessage, ...]
    ) -> str:
        lines = []
        if prior_summary is not None:
            lines.append(f"Summary so far: {prior_summary.content}")
        for message in evicted:
            lines.append(f"{message.role.value}: {message.content}")
        request = ProviderRequest(
            model_name=self.model_name,
            messages=(
                ChatMessage(role=Role.SYSTEM, content=SUMMARIZER_INSTRUCTION),
                ChatMessage(role=Role.USER, content="\n".join(lines)),
            ),
            temperature=0.0,
            max_output_tokens=self.summary_max_tokens,
            stage_tag="summarize",
        )
        try:
            response = self.gateway.complete(request)
        except GatewayError as exc:
            raise SummarizationFailed(str(exc)) from exc
        if not response.content.strip():
            raise SummarizationFailed("summarizer returned empty content")
        return response.content.strip()
