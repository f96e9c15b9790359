"""The interview state machine.

Drives one turn at a time: the user's message is screened, remembered,
answered through a stage-specific instruction, and folded into the session.
Each stage handler is responsible for capturing exactly one piece of the
cue workspace (event, one detail slot, or one rating); cue generation and
extraction run inline on the turns that complete their preconditions.

A turn either commits atomically or leaves the session untouched: handlers
work on a draft copy that is swapped in only after every provider call and
persistence write has succeeded.
"""

from __future__ import annotations

import copy
import logging
import re
import uuid
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from typing import Callable

from .domain import (
    ChatMessage,
    CueRatings,
    EftCue,
    InterviewSession,
    InterviewStage,
    Role,
    SLOT_ORDER,
    StageKind,
    TimeFrame,
    default_time_frames,
    validate_frames,
)
from .evaluation import format_check, tense_check
from .extraction import CueExtractor, ExtractionError, fallback_extract
from .gateway import LlmGateway, ProviderRequest
from .memory import MemoryManager, MemoryState
from .moderation import ModerationGate, ModerationUnavailable, ModerationVerdict
from .prompts import PromptLibrary
from .store import SessionStore

logger = logging.getLogger(__name__)

__all__ = [
    "EngineError",
    "SessionComplete",
    "CueValidationFailed",
    "StagePrompt",
    "TurnResult",
    "InterviewEngine",
    "FEEDBACK_QUESTIONS",
    "OFFTOPIC_SENTINEL",
    "parse_rating",
]

OFFTOPIC_SENTINEL = "OFFTOPIC:"

FEEDBACK_QUESTIONS = (
    "On a scale of 1-5, how vivid does this feel?",
    "On a scale of 1-5, how positive does this event feel?",
)

SLOT_QUESTION_PHRASES = {
    "companions": "who they will be with during the event",
    "activity": "what exactly they are doing",
    "location": "where the event takes place",
    "feeling": "how they are feeling during the event",
}

SLOT_QUESTIONS = {
    "companions": "Who will you be with?",
    "activity": "What exactly are you doing?",
    "location": "Where does this take place?",
    "feeling": "How are you feeling during it?",
}

OFFTOPIC_DECLINE = "I'm sorry, I can't help with that. Let's keep imagining your future event!"

RATING_REASK = "Please answer with a whole number from 1 to 5."


class EngineError(Exception):
    pass


class SessionComplete(EngineError):
    """A turn arrived for a session that is already Done."""


class CueValidationFailed(EngineError):
    """Both generation attempts failed a structural check; flags are stored."""


class _OutputBlocked(Exception):
    def __init__(self, text: str, verdict: ModerationVerdict):
        super().__init__("model output blocked")
        self.text = text
        self.verdict = verdict


class _OfftopicReply(Exception):
    def __init__(self, raw_reply: str):
        super().__init__("off-topic sentinel")
        self.raw_reply = raw_reply


@dataclass(frozen=True)
class StagePrompt:
    """The per-turn instruction for one stage, plus its example if any."""

    stage: InterviewStage
    instruction: str
    few_shot: str | None = None

    def __post_init__(self) -> None:
        if self.stage.kind is StageKind.CUE_GENERATION and not self.few_shot:
            raise ValueError("cue generation prompts always carry a few-shot example")

    def full_text(self) -> str:
        if self.few_shot:
            return f"{self.instruction}\n\nExample of the desired output:\n{self.few_shot}"
        return self.instruction


@dataclass(frozen=True)
class TurnResult:
    reply: str
    stage_before: InterviewStage
    stage_after: InterviewStage
    blocked: bool
    cue_emitted: EftCue | None = None

    def __post_init__(self) -> None:
        if self.blocked and self.stage_after != self.stage_before:
            raise ValueError("blocked turns must not change stage")


_INT_RE = re.compile(r"\b\d+\b")


def parse_rating(text: str) -> int | None:
    """First integer token in [1, 5], or None when there is none."""
    for token in _INT_RE.findall(text):
        value = int(token)
        if 1 <= value <= 5:
            return value
    return None


def pending_question(stage: InterviewStage, frames: list[TimeFrame]) -> str:
    """The question the interview is currently waiting on, restated."""
    if stage.kind is StageKind.GREETING:
        return "Are you ready to begin imagining your first future event?"
    if stage.kind is StageKind.EVENT_ELICITATION:
        label = frames[stage.frame_index].label
        return (
            f"Could you describe one positive event you are looking forward to "
            f"in about {label}?"
        )
    if stage.kind is StageKind.DETAIL_ELICITATION:
        return SLOT_QUESTIONS[stage.next_slot]
    if stage.kind is StageKind.FEEDBACK:
        return FEEDBACK_QUESTIONS[stage.next_question]
    return "Let's continue."


class InterviewEngine:
    """Composes the gateway, moderation gate, memory and extractor."""

    def __init__(
        self,
        gateway: LlmGateway,
        gate: ModerationGate | None = None,
        store: SessionStore | None = None,
        prompts: PromptLibrary | None = None,
        model_name: str = "gpt-4",
        budget_tokens: int = 8192,
        reserve_tokens: int = 512,
        keep_last: int = 6,
        interview_temperature: float = 0.7,
        reply_max_tokens: int = 256,
        clock: Callable[[], datetime] | None = None,
    ):
        self.gateway = gateway
        self.gate = gate or ModerationGate()
        self.store = store
        self.prompts = prompts or PromptLibrary()
        self.model_name = model_name
        self.budget_tokens = budget_tokens
        self.reserve_tokens = reserve_tokens
        self.interview_temperature = interview_temperature
        self.reply_max_tokens = reply_max_tokens
        self.memory = MemoryManager(gateway, model_name=model_name, keep_last=keep_last)
        self.extractor = CueExtractor(gateway, prompts=self.prompts, model_name=model_name)
        self._clock = clock or (lambda: datetime.now(timezone.utc))

    # -- session lifecycle --------------------------------------------------

    def start_session(
        self,
        frames: list[TimeFrame] | None = None,
        session_id: str | None = None,
    ) -> InterviewSession:
        frames = default_time_frames() if frames is None else list(frames)
        validate_frames(frames)
        now = self._now()
        system_message = ChatMessage(role=Role.SYSTEM, content=self.prompts.text("system_message"))
        session = InterviewSession.new(
            frames,
            system_message,
            session_id=session_id or uuid.uuid4().hex,
            created_at=now,
        )
        memory = self._memory_state(session)
        prompt = StagePrompt(
            stage=session.stage, instruction=self.prompts.render("greeting")
        )
        reply = self._complete(memory, prompt, stage_tag="greeting")
        verdict = self._screen_output(reply)
        if verdict.flagged:
            reply = self.gate.policy.fallback_output_reply
        session.transcript.append(ChatMessage(role=Role.ASSISTANT, content=reply))
        if self.store is not None:
            self.store.record(
                session.session_id,
                "session_created",
                {
                    "session_id": session.session_id,
                    "created_at": now,
                    "frames": [f.to_dict() for f in frames],
                    "system_content": system_message.content,
                },
                now,
            )
            self.store.record(session.session_id, "assistant_turn", {"content": reply}, now)
        return session

    def greeting_text(self, session: InterviewSession) -> str:
        for message in session.transcript[1:]:
            if message.role is Role.ASSISTANT:
                return message.content
        return ""

    # -- turn handling ------------------------------------------------------

    def handle_turn(self, session: InterviewSession, user_text: str) -> TurnResult:
        if session.stage.kind is StageKind.DONE:
            raise SessionComplete("session complete")
        if not user_text.strip():
            raise ValueError("user message must be non-empty")
        stage_before = session.stage
        verdict = self._screen_input(user_text)
        if verdict.flagged:
            self._record_blocked(session, "input", user_text, verdict)
            reply = (
                f"{self.gate.policy.fallback_input_reply}\n\n"
                f"{pending_question(stage_before, session.frames)}"
            )
            return TurnResult(
                reply=reply,
                stage_before=stage_before,
                stage_after=stage_before,
                blocked=True,
            )

        draft = copy.deepcopy(session)
        events: list[tuple[str, dict]] = []
        user_message = ChatMessage(role=Role.USER, content=user_text)
        rollover = self._remember(draft, user_message)
        events.append(("user_turn", {"text": user_text, **rollover}))

        try:
            result = self._dispatch(draft, stage_before, user_text, events)
        except _OutputBlocked as blocked:
            self._record_blocked(session, "output", blocked.text, blocked.verdict)
            return TurnResult(
                reply=self.gate.policy.fallback_output_reply,
                stage_before=stage_before,
                stage_after=stage_before,
                blocked=True,
            )
        except _OfftopicReply:
            result = self._finish_offtopic(draft, stage_before, events)

        self._commit(session, draft, events)
        return result

    def handle_offtopic(self, session: InterviewSession, user_text: str) -> TurnResult:
        """Decline an off-topic message and restate the pending question."""
        if session.stage.kind is StageKind.DONE:
            raise SessionComplete("session complete")
        draft = copy.deepcopy(session)
        events: list[tuple[str, dict]] = []
        rollover = self._remember(draft, ChatMessage(role=Role.USER, content=user_text))
        events.append(("user_turn", {"text": user_text, **rollover}))
        result = self._finish_offtopic(draft, session.stage, events)
        self._commit(session, draft, events)
        return result

    # -- stage handlers -----------------------------------------------------

    def _dispatch(
        self,
        draft: InterviewSession,
        stage: InterviewStage,
        user_text: str,
        events: list[tuple[str, dict]],
    ) -> TurnResult:
        kind = stage.kind
        if kind is StageKind.GREETING:
            return self._turn_greeting(draft, stage, events)
        if kind is StageKind.EVENT_ELICITATION:
            return self._turn_event(draft, stage, user_text, events)
        if kind is StageKind.DETAIL_ELICITATION:
            return self._turn_detail(draft, stage, user_text, events)
        if kind is StageKind.CUE_GENERATION:
            return self._turn_generate(draft, stage, events)
        if kind is StageKind.FEEDBACK:
            return self._turn_feedback(draft, stage, user_text, events)
        if kind is StageKind.EXTRACTION:
            return self._turn_extract(draft, stage, events)
        raise EngineError(f"no handler for stage {kind}")

    def _turn_greeting(self, draft, stage, events) -> TurnResult:
        reply = self._converse(
            draft, self._event_request_prompt(draft, 0, stage), stage_tag="greeting"
        )
        stage_after = InterviewStage.event_elicitation(0)
        return self._finish(draft, stage, stage_after, reply, events)

    def _turn_event(self, draft, stage, user_text, events) -> TurnResult:
        frame_index = stage.frame_index
        prompt = self._detail_request_prompt(draft, frame_index, "companions", user_text, stage)
        reply = self._converse(draft, prompt, stage_tag="event_elicitation")
        draft.cues[frame_index].event_summary = user_text
        stage_after = InterviewStage.detail_elicitation(frame_index, "companions")
        captured = {"frame_index": frame_index, "field": "event_summary", "value": user_text}
        return self._finish(draft, stage, stage_after, reply, events, captured=captured)

    def _turn_detail(self, draft, stage, user_text, events) -> TurnResult:
        frame_index = stage.frame_index
        slot = stage.next_slot
        captured = {"frame_index": frame_index, "field": slot, "value": user_text}
        slot_position = SLOT_ORDER.index(slot)
        if slot_position + 1 < len(SLOT_ORDER):
            next_slot = SLOT_ORDER[slot_position + 1]
            prompt = self._detail_request_prompt(
                draft, frame_index, next_slot, draft.cues[frame_index].event_summary, stage
            )
            reply = self._converse(draft, prompt, stage_tag="detail_elicitation")
            setattr(draft.cues[frame_index].slots, slot, user_text)
            stage_after = InterviewStage.detail_elicitation(frame_index, next_slot)
            return self._finish(draft, stage, stage_after, reply, events, captured=captured)

        # Final slot: acknowledge, then generate the cue in the same turn.
        ack = self._converse(
            draft,
            StagePrompt(stage=stage, instruction=self.prompts.render("brief_ack")),
            stage_tag="detail_elicitation",
        )
        setattr(draft.cues[frame_index].slots, slot, user_text)
        cue = self._generate_into_draft(draft, frame_index, events)
        stage_after = InterviewStage.feedback(frame_index, 0)
        reply = f"{ack}\n\n{cue.narrative}\n\n{FEEDBACK_QUESTIONS[0]}"
        return self._finish(
            draft, stage, stage_after, reply, events, cue_emitted=cue, captured=captured
        )

    def _turn_generate(self, draft, stage, events) -> TurnResult:
        # Only reachable if a session was interrupted mid-generation.
        cue = self._generate_into_draft(draft, stage.frame_index, events)
        stage_after = InterviewStage.feedback(stage.frame_index, 0)
        reply = f"{cue.narrative}\n\n{FEEDBACK_QUESTIONS[0]}"
        return self._finish(draft, stage, stage_after, reply, events, cue_emitted=cue)

    def _turn_feedback(self, draft, stage, user_text, events) -> TurnResult:
        frame_index = stage.frame_index
        question_index = stage.next_question
        rating = parse_rating(user_text)
        if rating is None:
            # Let the model distinguish a garbled rating from an off-topic
            # detour before re-asking.
            self._converse(
                draft,
                StagePrompt(stage=stage, instruction=self.prompts.render("brief_ack")),
                stage_tag="feedback",
            )
            reply = f"{RATING_REASK}\n\n{FEEDBACK_QUESTIONS[question_index]}"
            return self._finish(draft, stage, stage, reply, events)

        if question_index == 0:
            ack = self._converse(
                draft,
                StagePrompt(stage=stage, instruction=self.prompts.render("brief_ack")),
                stage_tag="feedback",
            )
            draft.partial_ratings[frame_index] = {"vividness": rating}
            events.append(
                ("rating_recorded", {"frame_index": frame_index, "question_index": 0, "value": rating})
            )
            stage_after = InterviewStage.feedback(frame_index, 1)
            reply = f"{ack}\n\n{FEEDBACK_QUESTIONS[1]}"
            return self._finish(draft, stage, stage_after, reply, events)

        last_frame = frame_index + 1 >= len(draft.frames)
        if not last_frame:
            prompt = self._event_request_prompt(draft, frame_index + 1, stage)
        else:
            prompt = StagePrompt(stage=stage, instruction=self.prompts.render("closing"))
        reply = self._converse(draft, prompt, stage_tag="feedback")
        partial = draft.partial_ratings.pop(frame_index, {})
        vividness = partial.get("vividness")
        if vividness is None:
            raise EngineError(f"no recorded vividness rating for frame {frame_index}")
        draft.ratings[frame_index] = CueRatings(vividness=vividness, valence=rating)
        events.append(
            ("rating_recorded", {"frame_index": frame_index, "question_index": 1, "value": rating})
        )
        if not last_frame:
            stage_after = InterviewStage.event_elicitation(frame_index + 1)
            return self._finish(draft, stage, stage_after, reply, events)
        self._extract_into_draft(draft, events)
        stage_after = InterviewStage.done()
        return self._finish(draft, stage, stage_after, reply, events)

    def _turn_extract(self, draft, stage, events) -> TurnResult:
        # Only reachable if a session was interrupted mid-extraction.
        reply = self._converse(
            draft,
            StagePrompt(stage=stage, instruction=self.prompts.render("closing")),
            stage_tag="feedback",
        )
        self._extract_into_draft(draft, events)
        return self._finish(draft, stage, InterviewStage.done(), reply, events)

    # -- cue generation and extraction ---------------------------------------

    def generate_cue(self, session: InterviewSession, frame_index: int) -> EftCue:
        """Generate the cue for one frame; one corrective re-prompt allowed.

        The cue is stored on the session with its validation flags before
        ``CueValidationFailed`` is raised, so a failed cue is never lost.
        """
        cue = session.cues[frame_index]
        if not cue.slots.complete():
            raise ValueError("cue generation requires all four detail slots")
        frame = session.frames[frame_index]
        prompt = self._cue_prompt(session, frame_index)
        memory = self._memory_state(session)
        base = tuple(memory.render()) + (
            ChatMessage(role=Role.SYSTEM, content=prompt.full_text()),
        )
        narrative = self._screened_completion(base, stage_tag="cue_generation")
        fmt_ok = format_check(narrative, frame)
        tense_ok_ = tense_check(narrative)
        if not (fmt_ok and tense_ok_):
            failed = self._failed_rules(fmt_ok, tense_ok_, frame)
            corrective = base + (
                ChatMessage(role=Role.ASSISTANT, content=narrative or "(empty)"),
                ChatMessage(
                    role=Role.SYSTEM,
                    content=self.prompts.render("cue_correction", failed_rule=failed),
                ),
            )
            narrative = self._screened_completion(corrective, stage_tag="cue_generation")
            fmt_ok = format_check(narrative, frame)
            tense_ok_ = tense_check(narrative)
        cue.narrative = narrative
        cue.format_ok = fmt_ok
        cue.tense_ok = tense_ok_
        if not (fmt_ok and tense_ok_):
            raise CueValidationFailed(
                f"cue for frame {frame.label!r} failed structural checks "
                f"(format_ok={fmt_ok}, tense_ok={tense_ok_})"
            )
        return cue

    def _generate_into_draft(self, draft, frame_index, events) -> EftCue:
        try:
            cue = self.generate_cue(draft, frame_index)
        except CueValidationFailed as exc:
            logger.warning("cue validation failed: %s", exc)
            cue = draft.cues[frame_index]
        events.append(("cue_generated", {"frame_index": frame_index, "cue": cue.to_dict()}))
        return cue

    def _extract_into_draft(self, draft, events) -> None:
        memory = self._memory_state(draft)
        try:
            extraction = self.extractor.extract(draft, memory)
        except ExtractionError as exc:
            logger.warning("model extraction failed (%s); using structured fallback", exc)
            extraction = fallback_extract(draft, FEEDBACK_QUESTIONS)
        draft.extraction = extraction
        events.append(("extraction_completed", {"extraction": extraction.to_dict()}))

    @staticmethod
    def _failed_rules(fmt_ok: bool, tense_ok_: bool, frame: TimeFrame) -> str:
        rules = []
        if not fmt_ok:
            rules.append(f'Begin with exactly "In about {frame.label},"')
        if not tense_ok_:
            rules.append('Write in the present tense (use "am", never "will" or "going to")')
        return "; ".join(rules)

    # -- prompt builders ------------------------------------------------------

    def _event_request_prompt(self, draft, frame_index, stage) -> StagePrompt:
        label = draft.frames[frame_index].label
        return StagePrompt(
            stage=stage, instruction=self.prompts.render("event_request", label=label)
        )

    def _detail_request_prompt(self, draft, frame_index, slot, event, stage) -> StagePrompt:
        label = draft.frames[frame_index].label
        instruction = self.prompts.render(
            "detail_request",
            event=event.strip(),
            label=label,
            slot_question=SLOT_QUESTION_PHRASES[slot],
        )
        return StagePrompt(stage=stage, instruction=instruction)

    def _cue_prompt(self, session, frame_index) -> StagePrompt:
        frame = session.frames[frame_index]
        slots = session.cues[frame_index].slots
        instruction = self.prompts.render(
            "cue_generation",
            label=frame.label,
            companions=slots.companions,
            activity=slots.activity,
            location=slots.location,
            feeling=slots.feeling,
        )
        return StagePrompt(
            stage=InterviewStage.cue_generation(frame_index),
            instruction=instruction,
            few_shot=self.prompts.text("cue_example"),
        )

    # -- shared plumbing -------------------------------------------------------

    def _now(self) -> str:
        return self._clock().isoformat()

    def _memory_state(self, session: InterviewSession) -> MemoryState:
        summary = None
        if session.summary:
            summary = ChatMessage(role=Role.ASSISTANT, content=session.summary)
        return MemoryState(
            system_message=session.transcript[0],
            summary=summary,
            recent=tuple(session.transcript[1 + session.summary_upto :]),
            budget_tokens=self.budget_tokens,
            reserve_tokens=self.reserve_tokens,
        )

    def _remember(self, draft: InterviewSession, message: ChatMessage) -> dict:
        state = self._memory_state(draft)
        new_state = self.memory.append(state, message)
        draft.transcript.append(message)
        if len(new_state.recent) != len(state.recent) + 1:
            draft.summary = new_state.summary.content
            draft.summary_upto = (len(draft.transcript) - 1) - len(new_state.recent)
            return {"summary": draft.summary, "summary_upto": draft.summary_upto}
        return {}

    def _complete(self, memory: MemoryState, prompt: StagePrompt, stage_tag: str) -> str:
        messages = tuple(memory.render()) + (
            ChatMessage(role=Role.SYSTEM, content=prompt.full_text()),
        )
        return self._raw_completion(messages, stage_tag)

    def _raw_completion(self, messages: tuple[ChatMessage, ...], stage_tag: str) -> str:
        input_tokens = sum(m.token_estimate for m in messages)
        max_output = min(self.reply_max_tokens, max(self.budget_tokens - input_tokens, 16))
        request = ProviderRequest(
            model_name=self.model_name,
            messages=messages,
            temperature=self.interview_temperature,
            max_output_tokens=max_output,
            stage_tag=stage_tag,
        )
        return self.gateway.complete(request).content.strip()

    def _screened_completion(self, messages: tuple[ChatMessage, ...], stage_tag: str) -> str:
        text = self._raw_completion(messages, stage_tag)
        verdict = self._screen_output(text)
        if verdict.flagged:
            raise _OutputBlocked(text, verdict)
        return text

    def _converse(self, draft: InterviewSession, prompt: StagePrompt, stage_tag: str) -> str:
        memory = self._memory_state(draft)
        reply = self._complete(memory, prompt, stage_tag)
        verdict = self._screen_output(reply)
        if verdict.flagged:
            raise _OutputBlocked(reply, verdict)
        if reply.startswith(OFFTOPIC_SENTINEL):
            raise _OfftopicReply(reply)
        return reply

    def _screen_input(self, text: str) -> ModerationVerdict:
        try:
            return self.gate.screen_input(text)
        except ModerationUnavailable:
            # Fail closed: unscreenable input never reaches the provider.
            return ModerationVerdict(
                flagged=True, categories={"unavailable": True}, scores={}
            )

    def _screen_output(self, text: str) -> ModerationVerdict:
        try:
            return self.gate.screen_output(text)
        except ModerationUnavailable:
            return ModerationVerdict(
                flagged=True, categories={"unavailable": True}, scores={}
            )

    def _finish_offtopic(
        self,
        draft: InterviewSession,
        stage: InterviewStage,
        events: list[tuple[str, dict]],
    ) -> TurnResult:
        reply = f"{OFFTOPIC_DECLINE}\n\n{pending_question(stage, draft.frames)}"
        rollover = self._remember(draft, ChatMessage(role=Role.ASSISTANT, content=reply))
        events.append(("assistant_turn", {"content": reply, **rollover}))
        return TurnResult(
            reply=reply, stage_before=stage, stage_after=stage, blocked=False
        )

    def _finish(
        self,
        draft: InterviewSession,
        stage_before: InterviewStage,
        stage_after: InterviewStage,
        reply: str,
        events: list[tuple[str, dict]],
        cue_emitted: EftCue | None = None,
        captured: dict | None = None,
    ) -> TurnResult:
        draft.stage = stage_after
        rollover = self._remember(draft, ChatMessage(role=Role.ASSISTANT, content=reply))
        events.append(("assistant_turn", {"content": reply, **rollover}))
        if stage_after != stage_before:
            payload = {"stage": stage_after.to_dict()}
            if captured is not None:
                payload["captured"] = captured
            events.append(("stage_changed", payload))
        return TurnResult(
            reply=reply,
            stage_before=stage_before,
            stage_after=stage_after,
            blocked=False,
            cue_emitted=cue_emitted,
        )

    def _commit(
        self,
        session: InterviewSession,
        draft: InterviewSession,
        events: list[tuple[str, dict]],
    ) -> None:
        now = self._now()
        draft.updated_at = now
        if self.store is not None:
            for kind, payload in events:
                self.store.record(draft.session_id, kind, payload, now)
        for field_ in fields(InterviewSession):
            setattr(session, field_.name, getattr(draft, field_.name))

    def _record_blocked(
        self,
        session: InterviewSession,
        direction: str,
        text: str,
        verdict: ModerationVerdict,
    ) -> None:
        if self.store is not None:
            self.store.record(
                session.session_id,
                "moderation_blocked",
                {"direction": direction, "text": text, "verdict": verdict.to_dict()},
                self._now(),
            )
