"""Durable per-session event logs with crash-tolerant loading.

Each session is one append-only JSONL file; every line carries a CRC32 of
its JSON payload so a torn final write is detected and dropped, while a
corrupted earlier line fails the load loudly. Replaying a log rebuilds the
``InterviewSession`` exactly.
"""

from __future__ import annotations

import json
import os
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .domain import (
    ChatMessage,
    CueRatings,
    EftCue,
    ExtractionResult,
    InterviewSession,
    InterviewStage,
    Role,
    TimeFrame,
)

__all__ = [
    "StoreError",
    "StorageError",
    "NotFound",
    "CorruptLog",
    "SequenceConflict",
    "EVENT_KINDS",
    "SessionEvent",
    "SessionSummary",
    "SessionStore",
    "replay_events",
]

EVENT_KINDS = (
    "session_created",
    "user_turn",
    "assistant_turn",
    "moderation_blocked",
    "stage_changed",
    "cue_generated",
    "rating_recorded",
    "extraction_completed",
)


class StoreError(Exception):
    pass


class StorageError(StoreError):
    pass


class NotFound(StoreError):
    pass


class CorruptLog(StoreError):
    pass


class SequenceConflict(StoreError):
    pass


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    timestamp: str
    kind: str
    payload: dict[str, Any]

    def __post_init__(self) -> None:
        if self.seq < 1:
            raise ValueError("event seq starts at 1")
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SessionEvent:
        return cls(
            seq=data["seq"],
            timestamp=data["timestamp"],
            kind=data["kind"],
            payload=data["payload"],
        )


@dataclass(frozen=True)
class SessionSummary:
    session_id: str
    stage: str
    created_at: str
    cue_count: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "stage": self.stage,
            "created_at": self.created_at,
            "cue_count": self.cue_count,
        }


def _encode_line(event: SessionEvent) -> str:
    body = json.dumps(event.to_dict(), ensure_ascii=False, separators=(",", ":"))
    crc = zlib.crc32(body.encode("utf-8")) & 0xFFFFFFFF
    return f"{body}\t{crc:08x}\n"


def _decode_line(line: str) -> SessionEvent | None:
    """Parse one log line; None means the line is damaged."""
    if "\t" not in line:
        return None
    body, _, crc_hex = line.rstrip("\n").rpartition("\t")
    try:
        expected = int(crc_hex, 16)
    except ValueError:
        return None
    if (zlib.crc32(body.encode("utf-8")) & 0xFFFFFFFF) != expected:
        return None
    try:
        return SessionEvent.from_dict(json.loads(body))
    except (json.JSONDecodeError, KeyError, ValueError):
        return None


class SessionStore:
    """One directory per session: events.jsonl plus extraction.json."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._next_seq: dict[str, int] = {}
        self._lock = threading.Lock()

    # -- paths ---------------------------------------------------------------

    def _session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def _events_path(self, session_id: str) -> Path:
        return self._session_dir(session_id) / "events.jsonl"

    def _extraction_path(self, session_id: str) -> Path:
        return self._session_dir(session_id) / "extraction.json"

    # -- writing ---------------------------------------------------------------

    def append_event(self, session_id: str, event: SessionEvent) -> None:
        """Durably append one event; seq must be exactly last + 1."""
        with self._lock:
            expected = self._next_seq.get(session_id)
            if expected is None:
                expected = self._scan_next_seq(session_id)
            if event.seq != expected:
                raise SequenceConflict(
                    f"expected seq {expected} for session {session_id}, got {event.seq}"
                )
            path = self._events_path(session_id)
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "a", encoding="utf-8") as handle:
                    handle.write(_encode_line(event))
                    handle.flush()
                    os.fsync(handle.fileno())
            except OSError as exc:
                raise StorageError(f"failed to append event: {exc}") from exc
            self._next_seq[session_id] = event.seq + 1

    def record(
        self, session_id: str, kind: str, payload: dict[str, Any], timestamp: str
    ) -> SessionEvent:
        """Build the next event in sequence and append it."""
        with self._lock:
            seq = self._next_seq.get(session_id)
            if seq is None:
                seq = self._scan_next_seq(session_id)
        event = SessionEvent(seq=seq, timestamp=timestamp, kind=kind, payload=payload)
        self.append_event(session_id, event)
        if kind == "extraction_completed":
            self.save_extraction(session_id, payload["extraction"])
        return event

    def save_extraction(self, session_id: str, extraction: dict[str, Any]) -> None:
        path = self._extraction_path(session_id)
        tmp = path.with_suffix(".json.tmp")
        try:
            tmp.write_text(json.dumps(extraction, ensure_ascii=False, indent=2), "utf-8")
            tmp.replace(path)
        except OSError as exc:
            raise StorageError(f"failed to write extraction: {exc}") from exc

    def _scan_next_seq(self, session_id: str) -> int:
        path = self._events_path(session_id)
        if not path.exists():
            return 1
        events, clean_bytes = self._read_raw(session_id)
        # Repair a torn tail before appending, otherwise the next write would
        # concatenate onto the damaged line.
        if path.stat().st_size > clean_bytes:
            with open(path, "r+b") as handle:
                handle.truncate(clean_bytes)
                handle.flush()
                os.fsync(handle.fileno())
        return (events[-1].seq + 1) if events else 1

    # -- reading ---------------------------------------------------------------

    def _read_raw(self, session_id: str) -> tuple[list[SessionEvent], int]:
        """Events plus the byte length of the clean prefix of the log."""
        path = self._events_path(session_id)
        if not path.exists():
            raise NotFound(f"no session {session_id!r} under {self.root}")
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise StorageError(f"failed to read events: {exc}") from exc
        lines = raw.decode("utf-8", errors="replace").splitlines(keepends=True)
        events: list[SessionEvent] = []
        clean_bytes = 0
        for index, line in enumerate(lines):
            event = _decode_line(line)
            is_last = index == len(lines) - 1
            if event is None or (is_last and not line.endswith("\n")):
                if is_last:
                    # Torn final write from a crash: drop it and recover.
                    break
                raise CorruptLog(
                    f"checksum failure at line {index + 1} "
                    f"(after seq {events[-1].seq if events else 0}) in {path}"
                )
            expected = events[-1].seq + 1 if events else 1
            if event.seq != expected:
                raise CorruptLog(
                    f"sequence gap at line {index + 1}: expected {expected}, got {event.seq}"
                )
            events.append(event)
            clean_bytes += len(line.encode("utf-8"))
        return events, clean_bytes

    def _read_events(self, session_id: str) -> list[SessionEvent]:
        return self._read_raw(session_id)[0]

    def load_events(self, session_id: str) -> list[SessionEvent]:
        return self._read_events(session_id)

    def load_session(self, session_id: str) -> InterviewSession:
        events = self._read_events(session_id)
        if not events:
            raise NotFound(f"session {session_id!r} has no recoverable events")
        return replay_events(events)

    def list_sessions(
        self, stage: str | None = None, since: str | None = None
    ) -> list[SessionSummary]:
        summaries: list[SessionSummary] = []
        try:
            candidates = [p for p in self.root.iterdir() if p.is_dir()]
        except OSError as exc:
            raise StorageError(f"failed to list store root: {exc}") from exc
        for directory in candidates:
            if not (directory / "events.jsonl").exists():
                continue
            try:
                session = self.load_session(directory.name)
            except NotFound:
                continue
            summaries.append(
                SessionSummary(
                    session_id=session.session_id,
                    stage=session.stage.kind.value,
                    created_at=session.created_at,
                    cue_count=session.cue_count(),
                )
            )
        summaries.sort(key=lambda s: (s.created_at, s.session_id))
        if stage is not None:
            summaries = [s for s in summaries if s.stage == stage]
        if since is not None:
            summaries = [s for s in summaries if s.created_at >= since]
        return summaries


def replay_events(events: list[SessionEvent]) -> InterviewSession:
    """Fold a session's event log back into its state; pure and total."""
    if not events or events[0].kind != "session_created":
        raise CorruptLog("log must begin with a session_created event")
    created = events[0].payload
    session = InterviewSession.new(
        frames=[TimeFrame.from_dict(f) for f in created["frames"]],
        system_message=ChatMessage(role=Role.SYSTEM, content=created["system_content"]),
        session_id=created["session_id"],
        created_at=created["created_at"],
    )
    for event in events[1:]:
        payload = event.payload
        kind = event.kind
        if kind == "user_turn":
            session.transcript.append(ChatMessage(role=Role.USER, content=payload["text"]))
            _apply_rollover(session, payload)
        elif kind == "assistant_turn":
            session.transcript.append(
                ChatMessage(role=Role.ASSISTANT, content=payload["content"])
            )
            _apply_rollover(session, payload)
        elif kind == "stage_changed":
            captured = payload.get("captured")
            if captured is not None:
                cue = session.cues[captured["frame_index"]]
                if captured["field"] == "event_summary":
                    cue.event_summary = captured["value"]
                else:
                    setattr(cue.slots, captured["field"], captured["value"])
            session.stage = InterviewStage.from_dict(payload["stage"])
        elif kind == "cue_generated":
            session.cues[payload["frame_index"]] = EftCue.from_dict(payload["cue"])
        elif kind == "rating_recorded":
            frame_index = payload["frame_index"]
            if payload["question_index"] == 0:
                session.partial_ratings[frame_index] = {"vividness": payload["value"]}
            else:
                partial = session.partial_ratings.pop(frame_index, {})
                session.ratings[frame_index] = CueRatings(
                    vividness=partial["vividness"], valence=payload["value"]
                )
        elif kind == "extraction_completed":
            session.extraction = ExtractionResult.from_dict(payload["extraction"])
        elif kind == "moderation_blocked":
            continue  # audit-only; blocked turns leave session state unchanged
        session.updated_at = event.timestamp
    return session


def _apply_rollover(session: InterviewSession, payload: dict[str, Any]) -> None:
    if "summary" in payload:
        session.summary = payload["summary"]
        session.summary_upto = payload["summary_upto"]
