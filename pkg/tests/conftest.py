"""Shared fixtures: deterministic interview plans and scripted providers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import pytest

from eftchat.domain import TimeFrame, default_time_frames
from eftchat.engine import FEEDBACK_QUESTIONS, InterviewEngine
from eftchat.extraction import score_key
from eftchat.gateway import LlmGateway, ProviderRequest, ProviderResponse, ScriptEntry, ScriptedProvider
from eftchat.moderation import ModerationGate, ModerationPolicy


@dataclass
class FramePlan:
    event: str
    companions: str
    activity: str
    location: str
    feeling: str
    narrative: str
    vividness: int
    valence: int

    def answers(self) -> list[str]:
        return [
            self.event,
            self.companions,
            self.activity,
            self.location,
            self.feeling,
            str(self.vividness),
            str(self.valence),
        ]


@dataclass
class InterviewPlan:
    """Everything needed to script a full offline interview."""

    frames: list[TimeFrame]
    per_frame: list[FramePlan]
    greeting: str = "Hi there! Ready to imagine some bright moments ahead?"

    def answers(self) -> list[str]:
        out = ["hi"]
        for frame_plan in self.per_frame:
            out.extend(frame_plan.answers())
        return out

    def extraction_payload(self) -> dict:
        generated = {
            frame.label: plan.narrative for frame, plan in zip(self.frames, self.per_frame)
        }
        scores: dict[str, int] = {}
        for frame, plan in zip(self.frames, self.per_frame):
            scores[score_key(FEEDBACK_QUESTIONS[0], frame.label)] = plan.vividness
            scores[score_key(FEEDBACK_QUESTIONS[1], frame.label)] = plan.valence
        return {"generated_efts": generated, "scores": scores}

    def script_entries(self) -> list[ScriptEntry]:
        entries = [
            ScriptEntry("greeting", 0, self.greeting),
            ScriptEntry(
                "greeting",
                1,
                f"Wonderful! What positive event could happen in about "
                f"{self.frames[0].label}?",
            ),
        ]
        for i, (frame, plan) in enumerate(zip(self.frames, self.per_frame)):
            entries.append(
                ScriptEntry("event_elicitation", i, "That sounds great! Who will you be with?")
            )
            base = i * 4
            entries.append(ScriptEntry("detail_elicitation", base + 0, "Lovely! What exactly are you doing?"))
            entries.append(ScriptEntry("detail_elicitation", base + 1, "Nice! Where does this take place?"))
            entries.append(ScriptEntry("detail_elicitation", base + 2, "Great! How are you feeling during it?"))
            entries.append(ScriptEntry("detail_elicitation", base + 3, "Perfect, I have everything I need."))
            entries.append(ScriptEntry("cue_generation", i, plan.narrative))
            entries.append(ScriptEntry("feedback", i * 2, "Thanks for the rating!"))
            if i + 1 < len(self.frames):
                next_label = self.frames[i + 1].label
                entries.append(
                    ScriptEntry(
                        "feedback",
                        i * 2 + 1,
                        f"Thank you! Now, what positive event could happen in about {next_label}?",
                    )
                )
            else:
                entries.append(
                    ScriptEntry("feedback", i * 2 + 1, "Thank you so much! Your cue texts are saved.")
                )
        entries.append(ScriptEntry("extraction", 0, json.dumps(self.extraction_payload())))
        return entries

    def provider(self) -> ScriptedProvider:
        return ScriptedProvider(self.script_entries())

    def script_json(self) -> str:
        return json.dumps(
            [
                {"stage": e.stage, "ordinal": e.ordinal, "content": e.content,
                 "finish_reason": e.finish_reason}
                for e in self.script_entries()
            ]
        )


def make_frame_plan(label: str, seed: str) -> FramePlan:
    companions = f"my {seed} friend"
    activity = f"enjoying a {seed} picnic"
    location = f"the {seed} park"
    feeling = "very happy"
    return FramePlan(
        event=f"a {seed} picnic outing",
        companions=companions,
        activity=activity,
        location=location,
        feeling=feeling,
        narrative=(
            f"In about {label}, I am {activity} with {companions} at {location}. "
            f"The sun is warm and I am feeling {feeling}."
        ),
        vividness=5,
        valence=4,
    )


def make_plan(frames: list[TimeFrame] | None = None) -> InterviewPlan:
    frames = frames or default_time_frames()
    seeds = ["cheerful", "sunny", "golden", "breezy", "quiet", "bright"]
    per_frame = [make_frame_plan(frame.label, seeds[i % len(seeds)]) for i, frame in enumerate(frames)]
    return InterviewPlan(frames=frames, per_frame=per_frame)


def make_engine(plan: InterviewPlan | None = None, store=None, **kwargs) -> InterviewEngine:
    plan = plan or make_plan()
    gateway = LlmGateway(plan.provider())
    return InterviewEngine(gateway=gateway, gate=ModerationGate(), store=store, **kwargs)


def run_interview(engine: InterviewEngine, plan: InterviewPlan):
    session = engine.start_session(frames=plan.frames)
    results = []
    for answer in plan.answers():
        results.append(engine.handle_turn(session, answer))
    return session, results


class FlakyProvider:
    """Fails transiently a fixed number of times before succeeding."""

    kind = "flaky"

    def __init__(self, failures: int, reply: str = "ok"):
        self.failures = failures
        self.reply = reply
        self.calls = 0

    def send(self, request: ProviderRequest) -> ProviderResponse:
        from eftchat.gateway import TransportError

        self.calls += 1
        if self.calls <= self.failures:
            raise TransportError("transient blip", transient=True)
        return ProviderResponse(content=self.reply, finish_reason="stop")


class StaticProvider:
    """Always returns the same reply; useful for memory/summarizer tests."""

    kind = "static"

    def __init__(self, reply: str):
        self.reply = reply
        self.requests: list[ProviderRequest] = []

    def send(self, request: ProviderRequest) -> ProviderResponse:
        self.requests.append(request)
        return ProviderResponse(content=self.reply, finish_reason="stop")


@pytest.fixture
def plan() -> InterviewPlan:
    return make_plan()


@pytest.fixture
def engine(plan) -> InterviewEngine:
    return make_engine(plan)
