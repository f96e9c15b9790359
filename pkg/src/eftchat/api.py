"""HTTP interface over the interview engine and evaluation harness.

The API layer holds no interview logic: each mutating endpoint delegates to
exactly one engine or extraction operation. Turn handling is serialized per
session; a second concurrent POST surfaces as a 409 rather than queueing.
"""

from __future__ import annotations

import logging
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import AppConfig
from .domain import InterviewSession, StageKind, parse_frame_label
from .engine import InterviewEngine, SessionComplete
from .evaluation import GraderParseError, RubricGrader
from .gateway import (
    EchoProvider,
    GatewayError,
    LlmGateway,
    RemoteProvider,
    ScriptedProvider,
)
from .moderation import ModerationGate, ModerationPolicy
from .prompts import PromptLibrary
from .store import NotFound, SessionStore, StoreError

logger = logging.getLogger(__name__)

__all__ = ["build_gateway", "build_gate", "create_app"]


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, retriable: bool = False):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.retriable = retriable

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={"code": self.code, "message": self.message, "retriable": self.retriable},
        )


class CreateSessionBody(BaseModel):
    frames: list[str] | None = None


class MessageBody(BaseModel):
    text: str


class EvalBody(BaseModel):
    narrative: str
    context: str | None = None
    expert: str | None = None


def build_gateway(config: AppConfig) -> LlmGateway:
    if config.provider == "scripted":
        provider = ScriptedProvider.from_file(config.provider_script)
    elif config.provider == "remote":
        provider = RemoteProvider(config.endpoint_url, credential_env=config.credential_env)
    else:
        provider = EchoProvider()
    return LlmGateway(provider)


def build_gate(config: AppConfig) -> ModerationGate:
    policy = ModerationPolicy(
        mode=config.moderation_mode,
        term_list_path=config.deny_list_path,
        endpoint_url=config.moderation_endpoint,
    )
    return ModerationGate(policy)


def create_app(
    config: AppConfig | None = None,
    engine: InterviewEngine | None = None,
    store: SessionStore | None = None,
) -> FastAPI:
    config = config or AppConfig()
    if store is None:
        store = SessionStore(config.store_root)
    if engine is None:
        prompts = PromptLibrary(config.prompt_dir)
        engine = InterviewEngine(
            gateway=build_gateway(config),
            gate=build_gate(config),
            store=store,
            prompts=prompts,
            model_name=config.model_name,
        )
    grader = RubricGrader(engine.gateway, prompts=engine.prompts, model_name=engine.model_name)

    app = FastAPI(title="eftchat", version="0.1.0")
    sessions: dict[str, InterviewSession] = {}
    turn_locks: dict[str, threading.Lock] = {}
    registry_lock = threading.Lock()

    if config.cors_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[config.cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError) -> JSONResponse:
        return exc.response()

    def get_session(session_id: str) -> InterviewSession:
        with registry_lock:
            cached = sessions.get(session_id)
        if cached is not None:
            return cached
        try:
            session = store.load_session(session_id)
        except NotFound:
            raise ApiError(404, "not_found", f"no session {session_id}")
        except StoreError as exc:
            raise ApiError(500, "internal", str(exc))
        with registry_lock:
            sessions.setdefault(session_id, session)
            return sessions[session_id]

    def turn_lock(session_id: str) -> threading.Lock:
        with registry_lock:
            return turn_locks.setdefault(session_id, threading.Lock())

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict:
        frames = None
        if body.frames is not None:
            if not body.frames:
                raise ApiError(400, "bad_request", "frames must be a non-empty list of labels")
            try:
                frames = [parse_frame_label(label) for label in body.frames]
            except ValueError as exc:
                raise ApiError(400, "bad_request", str(exc))
        try:
            session = engine.start_session(frames=frames)
        except ValueError as exc:
            raise ApiError(400, "bad_request", str(exc))
        except GatewayError as exc:
            raise ApiError(502, "provider_error", str(exc), retriable=True)
        with registry_lock:
            sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "stage": session.stage.to_dict(),
            "greeting": engine.greeting_text(session),
        }

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody) -> dict:
        session = get_session(session_id)
        if session.stage.kind is StageKind.DONE:
            raise ApiError(409, "conflict", "session complete")
        if not body.text.strip():
            raise ApiError(400, "bad_request", "text must be non-empty")
        lock = turn_lock(session_id)
        if not lock.acquire(blocking=False):
            raise ApiError(409, "conflict", "a turn is already in flight for this session")
        try:
            result = engine.handle_turn(session, body.text)
        except SessionComplete:
            raise ApiError(409, "conflict", "session complete")
        except GatewayError as exc:
            raise ApiError(502, "provider_error", str(exc), retriable=True)
        except StoreError as exc:
            raise ApiError(500, "internal", str(exc))
        finally:
            lock.release()
        return {
            "reply": result.reply,
            "stage": result.stage_after.to_dict(),
            "blocked": result.blocked,
            "cue": result.cue_emitted.to_dict() if result.cue_emitted else None,
        }

    @app.get("/sessions")
    def list_sessions(stage: str | None = None, since: str | None = None) -> list[dict]:
        try:
            return [s.to_dict() for s in store.list_sessions(stage=stage, since=since)]
        except StoreError as exc:
            raise ApiError(500, "internal", str(exc))

    @app.get("/sessions/{session_id}")
    def get_session_view(session_id: str) -> dict:
        return get_session(session_id).to_dict()

    @app.get("/sessions/{session_id}/cues")
    def get_cues(session_id: str) -> dict:
        session = get_session(session_id)
        if session.extraction is None:
            raise ApiError(404, "not_found", "extraction not available yet")
        return session.extraction.to_dict()

    @app.post("/eval/checklist")
    def eval_checklist(body: EvalBody) -> dict:
        try:
            return grader.checklist_grade(body.narrative, body.context or "").to_dict()
        except (GraderParseError, GatewayError) as exc:
            raise ApiError(502, "provider_error", str(exc), retriable=True)

    @app.post("/eval/comparison")
    def eval_comparison(body: EvalBody) -> dict:
        if body.expert is None:
            raise ApiError(400, "bad_request", "comparison requires an expert response")
        try:
            return grader.comparison_grade(
                body.narrative, body.expert, body.context or ""
            ).to_dict()
        except (GraderParseError, GatewayError) as exc:
            raise ApiError(502, "provider_error", str(exc), retriable=True)

    @app.post("/eval/classify")
    def eval_classify(body: EvalBody) -> dict:
        try:
            return grader.classify(body.narrative).to_dict()
        except (GraderParseError, GatewayError) as exc:
            raise ApiError(502, "provider_error", str(exc), retriable=True)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "provider_kind": engine.gateway.provider_kind}

    if config.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app
