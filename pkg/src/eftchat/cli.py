"""Operator entry points: serve the API, chat in a terminal, run batch
evaluations, and inspect stored sessions."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import AppConfig, ConfigError, load_config
from .domain import StageKind, parse_frame_label
from .engine import InterviewEngine
from .evaluation import CorpusFormatError, RubricGrader, eval_batch
from .gateway import GatewayError
from .moderation import ModerationError
from .prompts import PromptLibrary
from .store import SessionStore


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _build_engine(config: AppConfig) -> InterviewEngine:
    from .api import build_gate, build_gateway

    return InterviewEngine(
        gateway=build_gateway(config),
        gate=build_gate(config),
        store=SessionStore(config.store_root),
        prompts=PromptLibrary(config.prompt_dir),
        model_name=config.model_name,
    )


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    try:
        config = load_config(args.config)
        app = create_app(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(
        f"serving on {config.host}:{config.port} "
        f"(provider={config.provider}, store={config.store_root})"
    )
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


def _config_from_chat_args(args: argparse.Namespace) -> AppConfig:
    config = load_config(args.config) if args.config else AppConfig()
    if args.provider:
        config.provider = args.provider
    if args.provider_script:
        config.provider_script = args.provider_script
    if args.store:
        config.store_root = args.store
    config.validate()
    return config


def cmd_chat(args: argparse.Namespace) -> int:
    try:
        config = _config_from_chat_args(args)
        engine = _build_engine(config)
    except (ConfigError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    frames = None
    if args.frames:
        try:
            frames = [parse_frame_label(label) for label in args.frames]
        except ValueError as exc:
            print(f"bad frame label: {exc}", file=sys.stderr)
            return 2

    answers = None
    if args.script:
        script_path = Path(args.script)
        if not script_path.exists():
            print(f"answer script not found: {script_path}", file=sys.stderr)
            return 2
        answers = [line for line in script_path.read_text("utf-8").splitlines() if line.strip()]
    elif not sys.stdin.isatty():
        answers = [line for line in sys.stdin.read().splitlines() if line.strip()]

    try:
        session = engine.start_session(frames=frames, session_id=args.session_id)
    except (GatewayError, ModerationError) as exc:
        print(f"failed to start session: {exc}", file=sys.stderr)
        return 1
    print(f"assistant: {engine.greeting_text(session)}")

    def next_answer() -> str | None:
        if answers is not None:
            return answers.pop(0) if answers else None
        try:
            return input("you: ")
        except EOFError:
            return None

    exit_code = 0
    while session.stage.kind is not StageKind.DONE:
        answer = next_answer()
        if answer is None:
            print("(no more input; stopping)")
            break
        if answers is not None:
            print(f"user: {answer}")
        try:
            result = engine.handle_turn(session, answer)
        except (GatewayError, ModerationError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            exit_code = 1
            break
        print(f"assistant: {result.reply}")

    print("=== cues ===")
    for cue in session.cues:
        if cue.narrative:
            print(
                f"[{cue.time_frame.label}] {cue.narrative} "
                f"(format_ok={cue.format_ok} tense_ok={cue.tense_ok})"
            )
    if session.extraction is not None:
        print("=== extraction ===")
        print(json.dumps(session.extraction.to_dict(), indent=2, sort_keys=True))
    return exit_code


def cmd_eval(args: argparse.Namespace) -> int:
    grader = None
    if args.mode != "structural":
        try:
            config = load_config(args.config) if args.config else AppConfig()
            if args.provider:
                config.provider = args.provider
            if args.provider_script:
                config.provider_script = args.provider_script
            config.validate()
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        from .api import build_gateway

        try:
            grader = RubricGrader(
                build_gateway(config),
                prompts=PromptLibrary(config.prompt_dir),
                model_name=config.model_name,
            )
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
    try:
        report = eval_batch(args.corpus, args.mode, grader=grader, parallelism=args.parallelism)
    except CorpusFormatError as exc:
        print(f"corpus error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        _write_atomic(Path(args.out), json.dumps(report.to_dict(), indent=2, sort_keys=True))
    print(report.summary_table())
    return 1 if report.row_errors else 0


def cmd_sessions(args: argparse.Namespace) -> int:
    store = SessionStore(args.store)
    if args.session_id:
        session = store.load_session(args.session_id)
        print(json.dumps(session.to_dict(), indent=2, sort_keys=True))
        return 0
    for summary in store.list_sessions(stage=args.stage):
        print(json.dumps(summary.to_dict(), sort_keys=True))
    return 0


def cmd_openapi(args: argparse.Namespace) -> int:
    from .api import create_app

    app = create_app(AppConfig(store_root=args.store))
    text = json.dumps(app.openapi(), indent=2, sort_keys=True)
    if args.out:
        _write_atomic(Path(args.out), text)
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eftchat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", help="path to TOML config")
    serve.set_defaults(func=cmd_serve)

    chat = sub.add_parser("chat", help="run an interview in the terminal")
    chat.add_argument("--provider", choices=["echo", "scripted", "remote"])
    chat.add_argument("--provider-script", help="JSON reply script for the scripted provider")
    chat.add_argument("--frames", nargs="+", help="time frame labels, e.g. '1 month' '3 months'")
    chat.add_argument("--script", help="file of user answers for non-interactive replay")
    chat.add_argument("--store", help="session store root (default ./sessions)")
    chat.add_argument("--session-id", help="fixed session id (useful for tests)")
    chat.add_argument("--config", help="path to TOML config")
    chat.set_defaults(func=cmd_chat)

    evalp = sub.add_parser("eval", help="evaluate a JSONL cue corpus")
    evalp.add_argument("--mode", required=True,
                       choices=["checklist", "comparison", "classify", "structural", "all"])
    evalp.add_argument("--corpus", required=True, help="JSONL corpus path")
    evalp.add_argument("--out", help="write the JSON report here (atomic)")
    evalp.add_argument("--parallelism", type=int, default=1)
    evalp.add_argument("--provider", choices=["echo", "scripted", "remote"])
    evalp.add_argument("--provider-script")
    evalp.add_argument("--config")
    evalp.set_defaults(func=cmd_eval)

    sessions = sub.add_parser("sessions", help="inspect stored sessions")
    sessions.add_argument("--store", default="./sessions")
    sessions.add_argument("--stage", help="filter by stage kind, e.g. done")
    sessions.add_argument("session_id", nargs="?", help="show one full session")
    sessions.set_defaults(func=cmd_sessions)

    openapi = sub.add_parser("openapi", help="emit the OpenAPI document")
    openapi.add_argument("--out")
    openapi.add_argument("--store", default="./sessions")
    openapi.set_defaults(func=cmd_openapi)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
