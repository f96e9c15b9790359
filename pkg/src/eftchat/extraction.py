"""Structured extraction of a finished interview into JSON.

Two routes produce the same record: a model extraction call validated
against a fixed schema (with one corrective re-prompt for malformed
replies), and a deterministic fallback that reads the session's structured
state directly. The fallback doubles as the oracle for the model route and
as the production safety net.
"""

from __future__ import annotations

import json
import re
from typing import Any

import jsonschema

from .domain import (
    ChatMessage,
    ExtractionResult,
    InterviewSession,
    RATING_MAX,
    RATING_MIN,
    Role,
)
from .gateway import LlmGateway, ProviderRequest
from .memory import MemoryState
from .prompts import PromptLibrary

__all__ = [
    "ExtractionError",
    "ExtractionParseError",
    "ExtractionMismatch",
    "ExtractionResult",
    "CueExtractor",
    "EXTRACTION_SCHEMA",
    "score_key",
    "fallback_extract",
]

CORRECTIVE_SUFFIX = "Return ONLY valid JSON matching the schema."

EXTRACTION_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "InterviewExtraction",
    "type": "object",
    "properties": {
        "generated_efts": {
            "type": "object",
            "additionalProperties": {"type": "string", "minLength": 1},
        },
        "scores": {
            "type": "object",
            "additionalProperties": {
                "type": "integer",
                "minimum": RATING_MIN,
                "maximum": RATING_MAX,
            },
        },
    },
    "required": ["generated_efts", "scores"],
    "additionalProperties": False,
}


class ExtractionError(Exception):
    pass


class ExtractionParseError(ExtractionError):
    """Two consecutive replies failed strict JSON parsing or the schema."""


class ExtractionMismatch(ExtractionError):
    """The JSON was valid but disagrees with the session transcript."""


def score_key(question: str, frame_label: str) -> str:
    """Key for one rating answer; frame-qualified so repeats never collide."""
    return f"{question} ({frame_label})"


def fallback_extract(session: InterviewSession, questions: tuple[str, ...]) -> ExtractionResult:
    """Deterministic extraction from the session's own structured fields."""
    generated = {
        cue.time_frame.label: cue.narrative for cue in session.cues if cue.narrative
    }
    scores: dict[str, int] = {}
    for index, ratings in sorted(session.ratings.items()):
        label = session.frames[index].label
        scores[score_key(questions[0], label)] = ratings.vividness
        scores[score_key(questions[1], label)] = ratings.valence
    return ExtractionResult(generated_efts=generated, scores=scores)


_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)


def strip_code_fence(text: str) -> str:
    """Remove a single wrapping markdown fence pair, nothing more."""
    stripped = text.strip()
    match = _FENCE_RE.match(stripped)
    return match.group(1).strip() if match else stripped


def parse_extraction_reply(reply: str) -> ExtractionResult:
    """Strict parse: JSON only (one fence pair tolerated), schema-validated."""
    body = strip_code_fence(reply)
    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ExtractionParseError(f"reply is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(data, EXTRACTION_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ExtractionParseError(f"reply does not match the schema: {exc.message}") from exc
    return ExtractionResult.from_dict(data)


class CueExtractor:
    """Model-backed extraction with a one-shot corrective re-prompt."""

    def __init__(
        self,
        gateway: LlmGateway,
        prompts: PromptLibrary | None = None,
        model_name: str = "gpt-4",
        max_output_tokens: int = 600,
    ):
        self.gateway = gateway
        self.prompts = prompts or PromptLibrary()
        self.model_name = model_name
        self.max_output_tokens = max_output_tokens

    def _request(self, messages: tuple[ChatMessage, ...]) -> str:
        request = ProviderRequest(
            model_name=self.model_name,
            messages=messages,
            temperature=0.0,
            max_output_tokens=self.max_output_tokens,
            stage_tag="extraction",
        )
        return self.gateway.complete(request).content

    def extract(self, session: InterviewSession, memory: MemoryState) -> ExtractionResult:
        if session.cue_count() == 0:
            raise ValueError("extraction requires at least one generated cue")
        instruction = ChatMessage(role=Role.SYSTEM, content=self.prompts.text("extraction"))
        base_messages = tuple(memory.render()) + (instruction,)
        first_reply = self._request(base_messages)
        try:
            result = parse_extraction_reply(first_reply)
        except ExtractionParseError:
            corrective = tuple(base_messages) + (
                ChatMessage(role=Role.ASSISTANT, content=first_reply or "(empty)"),
                ChatMessage(role=Role.SYSTEM, content=CORRECTIVE_SUFFIX),
            )
            second_reply = self._request(corrective)
            try:
                result = parse_extraction_reply(second_reply)
            except ExtractionParseError as exc:
                raise ExtractionParseError(
                    f"two malformed extraction replies; last error: {exc}"
                ) from exc
        self._cross_check(session, result)
        return result

    @staticmethod
    def _cross_check(session: InterviewSession, result: ExtractionResult) -> None:
        """Extracted narratives must exist verbatim in the transcript."""
        contents = [m.content for m in session.transcript]
        for label, narrative in result.generated_efts.items():
            needle = narrative.strip()
            if not any(needle in content for content in contents):
                raise ExtractionMismatch(
                    f"extracted narrative for {label!r} does not appear in the transcript"
                )
        expected_labels = {cue.time_frame.label for cue in session.cues if cue.narrative}
        missing = expected_labels - set(result.generated_efts)
        if missing:
            raise ExtractionMismatch(f"extraction is missing frame(s): {sorted(missing)}")
