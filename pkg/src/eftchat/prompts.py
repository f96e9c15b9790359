"""Loader for the plain-text prompt templates.

Templates live in a prompts/ directory (the packaged one by default, or any
directory named in config) so wording edits need no code change. Placeholder
substitution replaces only the ``{name}`` tokens that are passed in, leaving
every other brace alone; several templates contain literal JSON braces.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

__all__ = ["PromptLibrary", "fill"]

TEMPLATE_NAMES = (
    "system_message",
    "greeting",
    "offtopic_rule",
    "event_request",
    "detail_request",
    "brief_ack",
    "closing",
    "cue_generation",
    "cue_example",
    "cue_correction",
    "extraction",
    "checklist",
    "comparison",
    "classify_vividness",
    "classify_tone",
)


def fill(template: str, **values: object) -> str:
    for key, value in values.items():
        template = template.replace("{" + key + "}", str(value))
    return template


class PromptLibrary:
    """All templates, loaded once at startup and keyed by file stem."""

    def __init__(self, directory: str | Path | None = None):
        self._texts: dict[str, str] = {}
        for name in TEMPLATE_NAMES:
            self._texts[name] = self._read(name, directory)

    @staticmethod
    def _read(name: str, directory: str | Path | None) -> str:
        filename = f"{name}.txt"
        if directory is not None:
            candidate = Path(directory) / filename
            if candidate.exists():
                return candidate.read_text(encoding="utf-8").strip("\n")
        return (
            resources.files("eftchat")
            .joinpath("prompts", filename)
            .read_text("utf-8")
            .strip("\n")
        )

    def text(self, name: str) -> str:
        return self._texts[name]

    def render(self, name: str, **values: object) -> str:
        template = self._texts[name]
        if "{offtopic_rule}" in template and "offtopic_rule" not in values:
            values["offtopic_rule"] = self._texts["offtopic_rule"]
        return fill(template, **values)
