"""Shared domain types for the EFT interview pipeline.

Everything in here is a plain value type with a canonical JSON form
(snake_case field names, stable key sets). No I/O, no provider calls.
"""

from __future__ import annotations

import math
import re
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any


def token_estimate(text: str) -> int:
    """Estimate the token count of ``text`` as ceil(len/4).

    Deterministic and dependency-free; conservative enough to guard the
    context budget without a real tokenizer.
    """
    return math.ceil(len(text) / 4)


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class ChatMessage:
    """One turn of conversation; the unit of memory and provider I/O."""

    role: Role
    content: str
    token_estimate: int = field(init=False)

    def __post_init__(self) -> None:
        if self.role is not Role.SYSTEM and not self.content:
            raise ValueError(f"{self.role.value} message content must be non-empty")
        object.__setattr__(self, "token_estimate", token_estimate(self.content))

    def to_dict(self) -> dict[str, Any]:
        return {
            "role": self.role.value,
            "content": self.content,
            "token_estimate": self.token_estimate,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ChatMessage:
        msg = cls(role=Role(data["role"]), content=data["content"])
        stored = data.get("token_estimate")
        if stored is not None and stored != msg.token_estimate:
            raise ValueError(
                f"token_estimate {stored} does not match estimator "
                f"({msg.token_estimate}) for stored message"
            )
        return msg


@dataclass(frozen=True)
class TimeFrame:
    """The horizon a cue is anchored to, e.g. '1 month' at ~30 days."""

    label: str
    approximate_days: int

    def __post_init__(self) -> None:
        if not self.label.strip():
            raise ValueError("time frame label must be non-empty")
        if self.approximate_days <= 0:
            raise ValueError("approximate_days must be positive")

    def cue_prefix(self) -> str:
        return f"In about {self.label}"

    def to_dict(self) -> dict[str, Any]:
        return {"label": self.label, "approximate_days": self.approximate_days}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TimeFrame:
        return cls(label=data["label"], approximate_days=data["approximate_days"])


def default_time_frames() -> list[TimeFrame]:
    """The default three-horizon list: 1, 3 and 6 months out."""
    return [
        TimeFrame("1 month", 30),
        TimeFrame("3 months", 90),
        TimeFrame("6 months", 180),
    ]


_LABEL_UNITS = {
    "day": 1,
    "days": 1,
    "week": 7,
    "weeks": 7,
    "month": 30,
    "months": 30,
    "year": 365,
    "years": 365,
}

_LABEL_RE = re.compile(r"^\s*(\d+|a|an|one)\s+([a-z]+)\s*$", re.IGNORECASE)


def parse_frame_label(label: str) -> TimeFrame:
    """Build a TimeFrame from a label like '1 month' or '2 weeks'.

    Raises ValueError for labels that do not name a count and a known unit.
    """
    m = _LABEL_RE.match(label)
    if not m:
        raise ValueError(f"unrecognized time frame label: {label!r}")
    count_raw, unit = m.group(1).lower(), m.group(2).lower()
    if unit not in _LABEL_UNITS:
        raise ValueError(f"unrecognized time unit in label: {label!r}")
    count = 1 if count_raw in ("a", "an", "one") else int(count_raw)
    if count <= 0:
        raise ValueError(f"time frame count must be positive: {label!r}")
    return TimeFrame(label=label.strip(), approximate_days=count * _LABEL_UNITS[unit])


SLOT_ORDER = ("companions", "activity", "location", "feeling")


@dataclass
class DetailSlots:
    """The four elicited facets of an event: who, what, where, feeling."""

    companions: str | None = None
    activity: str | None = None
    location: str | None = None
    feeling: str | None = None

    def complete(self) -> bool:
        return all(
            getattr(self, name) is not None and getattr(self, name).strip()
            for name in SLOT_ORDER
        )

    def to_dict(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in SLOT_ORDER}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DetailSlots:
        return cls(**{name: data.get(name) for name in SLOT_ORDER})


def slots_complete(slots: DetailSlots) -> bool:
    """True iff all four detail slots are present and non-blank."""
    return slots.complete()


@dataclass
class EftCue:
    """A cue workspace for one time frame, filled in over the interview."""

    time_frame: TimeFrame
    event_summary: str = ""
    slots: DetailSlots = field(default_factory=DetailSlots)
    narrative: str = ""
    format_ok: bool = False
    tense_ok: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "time_frame": self.time_frame.to_dict(),
            "event_summary": self.event_summary,
            "slots": self.slots.to_dict(),
            "narrative": self.narrative,
            "format_ok": self.format_ok,
            "tense_ok": self.tense_ok,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> EftCue:
        return cls(
            time_frame=TimeFrame.from_dict(data["time_frame"]),
            event_summary=data.get("event_summary", ""),
            slots=DetailSlots.from_dict(data.get("slots", {})),
            narrative=data.get("narrative", ""),
            format_ok=data.get("format_ok", False),
            tense_ok=data.get("tense_ok", False),
        )


RATING_MIN = 1
RATING_MAX = 5


@dataclass(frozen=True)
class CueRatings:
    """User feedback for one cue: vividness and valence, both 1-5."""

    vividness: int
    valence: int

    def __post_init__(self) -> None:
        for name in ("vividness", "valence"):
            value = getattr(self, name)
            if not isinstance(value, int) or not RATING_MIN <= value <= RATING_MAX:
                raise ValueError(f"{name} must be an integer in [1, 5], got {value!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"vividness": self.vividness, "valence": self.valence}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CueRatings:
        return cls(vividness=data["vividness"], valence=data["valence"])


class StageKind(str, Enum):
    GREETING = "greeting"
    EVENT_ELICITATION = "event_elicitation"
    DETAIL_ELICITATION = "detail_elicitation"
    CUE_GENERATION = "cue_generation"
    FEEDBACK = "feedback"
    EXTRACTION = "extraction"
    DONE = "done"


@dataclass(frozen=True)
class InterviewStage:
    """Tagged interview stage; constructor helpers enforce field presence."""

    kind: StageKind
    frame_index: int | None = None
    next_slot: str | None = None
    next_question: int | None = None

    def __post_init__(self) -> None:
        needs_frame = self.kind in (
            StageKind.EVENT_ELICITATION,
            StageKind.DETAIL_ELICITATION,
            StageKind.CUE_GENERATION,
            StageKind.FEEDBACK,
        )
        if needs_frame and (self.frame_index is None or self.frame_index < 0):
            raise ValueError(f"{self.kind.value} stage requires a frame_index")
        if self.kind is StageKind.DETAIL_ELICITATION and self.next_slot not in SLOT_ORDER:
            raise ValueError(f"detail stage requires next_slot in {SLOT_ORDER}")
        if self.kind is StageKind.FEEDBACK and self.next_question not in (0, 1):
            raise ValueError("feedback stage requires next_question in {0, 1}")

    @classmethod
    def greeting(cls) -> InterviewStage:
        return cls(StageKind.GREETING)

    @classmethod
    def event_elicitation(cls, frame_index: int) -> InterviewStage:
        return cls(StageKind.EVENT_ELICITATION, frame_index=frame_index)

    @classmethod
    def detail_elicitation(cls, frame_index: int, next_slot: str) -> InterviewStage:
        return cls(StageKind.DETAIL_ELICITATION, frame_index=frame_index, next_slot=next_slot)

    @classmethod
    def cue_generation(cls, frame_index: int) -> InterviewStage:
        return cls(StageKind.CUE_GENERATION, frame_index=frame_index)

    @classmethod
    def feedback(cls, frame_index: int, next_question: int) -> InterviewStage:
        return cls(StageKind.FEEDBACK, frame_index=frame_index, next_question=next_question)

    @classmethod
    def extraction(cls) -> InterviewStage:
        return cls(StageKind.EXTRACTION)

    @classmethod
    def done(cls) -> InterviewStage:
        return cls(StageKind.DONE)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "frame_index": self.frame_index,
            "next_slot": self.next_slot,
            "next_question": self.next_question,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> InterviewStage:
        return cls(
            kind=StageKind(data["kind"]),
            frame_index=data.get("frame_index"),
            next_slot=data.get("next_slot"),
            next_question=data.get("next_question"),
        )


@dataclass(frozen=True)
class ExtractionResult:
    """Structured record of a finished interview: cues plus per-question scores."""

    generated_efts: dict[str, str]
    scores: dict[str, int]

    def __post_init__(self) -> None:
        for question, score in self.scores.items():
            if not isinstance(score, int) or not RATING_MIN <= score <= RATING_MAX:
                raise ValueError(f"score for {question!r} must be an integer in [1, 5]")

    def to_dict(self) -> dict[str, Any]:
        return {"generated_efts": dict(self.generated_efts), "scores": dict(self.scores)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExtractionResult:
        return cls(
            generated_efts=dict(data["generated_efts"]),
            scores=dict(data["scores"]),
        )


@dataclass
class InterviewSession:
    """Full state of one interview.

    ``summary_upto`` counts transcript messages after the system message that
    have been folded into ``summary``; together they let the conversation
    memory be rebuilt exactly from persisted state. ``partial_ratings`` holds
    a frame's first answered rating until its pair completes.
    """

    session_id: str
    stage: InterviewStage
    frames: list[TimeFrame]
    cues: list[EftCue]
    ratings: dict[int, CueRatings]
    transcript: list[ChatMessage]
    summary: str | None
    extraction: ExtractionResult | None
    created_at: str
    updated_at: str
    summary_upto: int = 0
    partial_ratings: dict[int, dict[str, int]] = field(default_factory=dict)

    @classmethod
    def new(
        cls,
        frames: list[TimeFrame],
        system_message: ChatMessage,
        session_id: str | None = None,
        created_at: str | None = None,
    ) -> InterviewSession:
        validate_frames(frames)
        now = created_at or utc_now_iso()
        return cls(
            session_id=session_id or uuid.uuid4().hex,
            stage=InterviewStage.greeting(),
            frames=list(frames),
            cues=[EftCue(time_frame=f) for f in frames],
            ratings={},
            transcript=[system_message],
            summary=None,
            extraction=None,
            created_at=now,
            updated_at=now,
        )

    def cue_count(self) -> int:
        return sum(1 for cue in self.cues if cue.narrative)

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "stage": self.stage.to_dict(),
            "frames": [f.to_dict() for f in self.frames],
            "cues": [c.to_dict() for c in self.cues],
            "ratings": {str(i): r.to_dict() for i, r in self.ratings.items()},
            "transcript": [m.to_dict() for m in self.transcript],
            "summary": self.summary,
            "extraction": self.extraction.to_dict() if self.extraction else None,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "summary_upto": self.summary_upto,
            "partial_ratings": {str(i): dict(v) for i, v in self.partial_ratings.items()},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> InterviewSession:
        extraction = data.get("extraction")
        return cls(
            session_id=data["session_id"],
            stage=InterviewStage.from_dict(data["stage"]),
            frames=[TimeFrame.from_dict(f) for f in data["frames"]],
            cues=[EftCue.from_dict(c) for c in data["cues"]],
            ratings={int(i): CueRatings.from_dict(r) for i, r in data["ratings"].items()},
            transcript=[ChatMessage.from_dict(m) for m in data["transcript"]],
            summary=data.get("summary"),
            extraction=ExtractionResult.from_dict(extraction) if extraction else None,
            created_at=data["created_at"],
            updated_at=data["updated_at"],
            summary_upto=data.get("summary_upto", 0),
            partial_ratings={
                int(i): dict(v) for i, v in data.get("partial_ratings", {}).items()
            },
        )


def validate_frames(frames: list[TimeFrame]) -> None:
    if not frames:
        raise ValueError("at least one time frame is required")
    days = [f.approximate_days for f in frames]
    if any(b <= a for a, b in zip(days, days[1:])):
        raise ValueError("time frame horizons must be strictly increasing")
