"""Automated episodic-future-thinking interview chatbot.

Guides a user through event selection, detail elicitation, cue generation
and rating, then evaluates the resulting cue texts with model-graded
rubrics and deterministic validators.
"""

from .domain import (
    ChatMessage,
    CueRatings,
    DetailSlots,
    EftCue,
    ExtractionResult,
    InterviewSession,
    InterviewStage,
    Role,
    StageKind,
    TimeFrame,
    default_time_frames,
    slots_complete,
    token_estimate,
)
from .engine import InterviewEngine, TurnResult
from .gateway import EchoProvider, LlmGateway, RemoteProvider, ScriptedProvider
from .moderation import ModerationGate, ModerationPolicy
from .store import SessionStore

__version__ = "0.1.0"

__all__ = [
    "ChatMessage",
    "CueRatings",
    "DetailSlots",
    "EftCue",
    "EchoProvider",
    "ExtractionResult",
    "InterviewEngine",
    "InterviewSession",
    "InterviewStage",
    "LlmGateway",
    "ModerationGate",
    "ModerationPolicy",
    "RemoteProvider",
    "Role",
    "ScriptedProvider",
    "SessionStore",
    "StageKind",
    "TimeFrame",
    "TurnResult",
    "default_time_frames",
    "slots_complete",
    "token_estimate",
    "__version__",
]
