"""Cue evaluation: structural validators plus three model-graded rubrics.

Structural checks (`format_check`, `tense_check`) are pure string rules.
The rubric graders fill fixed templates, call the gateway at temperature 0,
and parse the constrained replies strictly: lenient about formatting,
unforgiving about vocabulary. A parse that cannot be resolved raises
``GraderParseError`` rather than defaulting.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .domain import ChatMessage, Role, TimeFrame
from .gateway import GatewayError, LlmGateway, ProviderRequest
from .prompts import PromptLibrary

__all__ = [
    "EvalError",
    "GraderParseError",
    "CorpusFormatError",
    "ChecklistResult",
    "ComparisonResult",
    "ClassificationResult",
    "EvalReport",
    "format_check",
    "tense_check",
    "RubricGrader",
    "eval_batch",
]

FUTURE_MARKERS = ("will", "going to", "gonna", "won't", "shall")
VIVIDNESS_LABELS = ("not vivid", "somewhat vivid", "highly vivid")
TONE_LABELS = ("positive", "neutral", "negative")
COMPARISON_CHOICES = frozenset("ABCDE")
EVAL_MODES = ("checklist", "comparison", "classify", "structural", "all")


class EvalError(Exception):
    pass


class GraderParseError(EvalError):
    """A grader reply could not be resolved against its closed vocabulary."""


class CorpusFormatError(EvalError):
    pass


# --------------------------------------------------------------------------
# Structural validators


def _label_variants(label: str) -> list[str]:
    """Article/number variants of a frame label: '1 month' also matches 'a month'."""
    base = label.strip().lower()
    variants = {base}
    first, _, rest = base.partition(" ")
    if rest:
        if first in ("1", "one"):
            variants.update({f"a {rest}", f"an {rest}", f"one {rest}", f"1 {rest}"})
        elif first in ("a", "an"):
            variants.update({f"1 {rest}", f"one {rest}"})
    return sorted(variants, key=len, reverse=True)


def format_check(narrative: str, frame: TimeFrame) -> bool:
    """True iff the narrative opens with "In about <frame label>"."""
    text = narrative.strip().lower()
    return any(text.startswith(f"in about {variant}") for variant in _label_variants(frame.label))


_FUTURE_RE = re.compile(
    r"\b(" + "|".join(re.escape(m) for m in FUTURE_MARKERS) + r")\b", re.IGNORECASE
)


def tense_check(narrative: str) -> bool:
    """False if any future-tense marker appears as a whole word.

    This is a marker-list heuristic, not a parser: a present-tense cue with an
    embedded future clause ("we bet on who will catch the biggest fish") fails
    it even though a human grader would accept the cue. Both signals are
    reported side by side for exactly that reason.
    """
    return _FUTURE_RE.search(narrative) is None


# --------------------------------------------------------------------------
# Rubric results


@dataclass(frozen=True)
class ChecklistResult:
    vivid: bool
    format_ok: bool
    present_tense: bool
    raw_reply: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "vivid": self.vivid,
            "format_ok": self.format_ok,
            "present_tense": self.present_tense,
            "raw_reply": self.raw_reply,
        }


@dataclass(frozen=True)
class ComparisonResult:
    choices: frozenset[str]
    raw_reply: str

    def __post_init__(self) -> None:
        if not self.choices <= COMPARISON_CHOICES:
            raise ValueError("choices must be drawn from A-E")

    def to_dict(self) -> dict[str, Any]:
        return {"choices": sorted(self.choices), "raw_reply": self.raw_reply}


@dataclass(frozen=True)
class ClassificationResult:
    vividness_level: str
    emotional_tone: str

    def __post_init__(self) -> None:
        if self.vividness_level not in VIVIDNESS_LABELS:
            raise ValueError(f"vividness_level must be one of {VIVIDNESS_LABELS}")
        if self.emotional_tone not in TONE_LABELS:
            raise ValueError(f"emotional_tone must be one of {TONE_LABELS}")

    def to_dict(self) -> dict[str, Any]:
        return {"vividness_level": self.vividness_level, "emotional_tone": self.emotional_tone}


# --------------------------------------------------------------------------
# Reply parsers (pure; exercised directly by the parser corpus tests)

_YESNO_RE = re.compile(
    r"(?:question\s*)?([1-3])\s*[.:)\-]*\s*(yes|no)\b", re.IGNORECASE
)


def parse_checklist_reply(reply: str) -> tuple[bool, bool, bool]:
    answers: dict[int, bool] = {}
    for number, verdict in _YESNO_RE.findall(reply):
        k = int(number)
        value = verdict.lower() == "yes"
        if k in answers and answers[k] != value:
            raise GraderParseError(f"conflicting answers for question {k}")
        answers[k] = value
    missing = [k for k in (1, 2, 3) if k not in answers]
    if missing:
        raise GraderParseError(f"missing Yes/No answer for question(s) {missing}")
    return answers[1], answers[2], answers[3]


_CHOICE_RE = re.compile(r"(?<![A-Za-z])([A-E])(?![a-z])")
_NONE_RE = re.compile(r"\bnone(?:\s+(?:apply|of\s+the\s+above))?\b", re.IGNORECASE)


def parse_comparison_reply(reply: str) -> frozenset[str]:
    stripped = reply.strip().strip(".()")
    if re.fullmatch(r"[A-E]{1,5}", stripped):
        return frozenset(stripped)
    letters = frozenset(_CHOICE_RE.findall(reply))
    if letters:
        return letters
    if _NONE_RE.search(reply):
        return frozenset()
    raise GraderParseError("no A-E selection or none-phrase in grader reply")


def _normalize_label(reply: str) -> str:
    return re.sub(r"[\s]+", " ", reply.strip().strip(".,!\"'`").lower())


def parse_label_reply(reply: str, labels: tuple[str, ...]) -> str:
    normalized = _normalize_label(reply)
    if normalized in labels:
        return normalized
    raise GraderParseError(f"reply {reply!r} is not one of {labels}")


# --------------------------------------------------------------------------
# Model-graded rubrics


class RubricGrader:
    """Runs the three grading rubrics through the gateway."""

    def __init__(
        self,
        gateway: LlmGateway,
        prompts: PromptLibrary | None = None,
        model_name: str = "gpt-4",
        max_output_tokens: int = 200,
    ):
        self.gateway = gateway
        self.prompts = prompts or PromptLibrary()
        self.model_name = model_name
        self.max_output_tokens = max_output_tokens

    def _grade(self, prompt_text: str, stage_tag: str) -> str:
        request = ProviderRequest(
            model_name=self.model_name,
            messages=(ChatMessage(role=Role.SYSTEM, content=prompt_text),),
            temperature=0.0,
            max_output_tokens=self.max_output_tokens,
            stage_tag=stage_tag,
        )
        return self.gateway.complete(request).content

    def checklist_grade(self, narrative: str, user_context: str) -> ChecklistResult:
        prompt = self.prompts.render("checklist", user_context=user_context, narrative=narrative)
        reply = self._grade(prompt, "grade_checklist")
        vivid, fmt, tense = parse_checklist_reply(reply)
        return ChecklistResult(vivid=vivid, format_ok=fmt, present_tense=tense, raw_reply=reply)

    def comparison_grade(self, narrative: str, expert: str, user_context: str) -> ComparisonResult:
        prompt = self.prompts.render(
            "comparison", user_context=user_context, expert=expert, narrative=narrative
        )
        reply = self._grade(prompt, "grade_comparison")
        return ComparisonResult(choices=parse_comparison_reply(reply), raw_reply=reply)

    def classify(self, narrative: str) -> ClassificationResult:
        vivid_reply = self._grade(
            self.prompts.render("classify_vividness", narrative=narrative), "grade_vividness"
        )
        tone_reply = self._grade(
            self.prompts.render("classify_tone", narrative=narrative), "grade_tone"
        )
        return ClassificationResult(
            vividness_level=parse_label_reply(vivid_reply, VIVIDNESS_LABELS),
            emotional_tone=parse_label_reply(tone_reply, TONE_LABELS),
        )


# --------------------------------------------------------------------------
# Batch evaluation over JSONL corpora


@dataclass
class CorpusRow:
    cue_id: str
    time_frame: str
    narrative: str
    user_context: str = ""
    expert: str | None = None


@dataclass
class RowReport:
    cue_id: str
    format_ok: bool | None = None
    tense_ok: bool | None = None
    checklist: ChecklistResult | None = None
    comparison: ComparisonResult | None = None
    classification: ClassificationResult | None = None
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "cue_id": self.cue_id,
            "format_ok": self.format_ok,
            "tense_ok": self.tense_ok,
            "checklist": self.checklist.to_dict() if self.checklist else None,
            "comparison": self.comparison.to_dict() if self.comparison else None,
            "classification": self.classification.to_dict() if self.classification else None,
            "errors": list(self.errors),
        }


@dataclass
class EvalReport:
    mode: str
    per_cue: list[RowReport]
    aggregates: dict[str, dict[str, Any]] = field(default_factory=dict)

    def recompute_aggregates(self) -> dict[str, dict[str, Any]]:
        """Aggregates are always derivable from the per-cue rows."""

        def rate(pairs: list[bool]) -> dict[str, Any]:
            total = len(pairs)
            passed = sum(pairs)
            return {
                "passed": passed,
                "total": total,
                "rate": (passed / total) if total else None,
            }

        aggregates: dict[str, dict[str, Any]] = {}
        structural_fmt = [r.format_ok for r in self.per_cue if r.format_ok is not None]
        structural_tense = [r.tense_ok for r in self.per_cue if r.tense_ok is not None]
        if structural_fmt:
            aggregates["format"] = rate(structural_fmt)
        if structural_tense:
            aggregates["tense"] = rate(structural_tense)
        checklists = [r.checklist for r in self.per_cue if r.checklist is not None]
        if checklists:
            aggregates["checklist_vivid"] = rate([c.vivid for c in checklists])
            aggregates["checklist_format"] = rate([c.format_ok for c in checklists])
            aggregates["checklist_tense"] = rate([c.present_tense for c in checklists])
        comparisons = [r.comparison for r in self.per_cue if r.comparison is not None]
        if comparisons:
            for letter in sorted(COMPARISON_CHOICES):
                aggregates[f"comparison_{letter}"] = rate(
                    [letter in c.choices for c in comparisons]
                )
        classifications = [r.classification for r in self.per_cue if r.classification is not None]
        if classifications:
            aggregates["highly_vivid"] = rate(
                [c.vividness_level == "highly vivid" for c in classifications]
            )
            aggregates["positive_tone"] = rate(
                [c.emotional_tone == "positive" for c in classifications]
            )
        aggregates["rows"] = {
            "passed": sum(1 for r in self.per_cue if not r.errors),
            "total": len(self.per_cue),
            "rate": (
                sum(1 for r in self.per_cue if not r.errors) / len(self.per_cue)
                if self.per_cue
                else None
            ),
        }
        return aggregates

    @property
    def row_errors(self) -> int:
        return sum(1 for r in self.per_cue if r.errors)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "per_cue": [r.to_dict() for r in self.per_cue],
            "aggregates": self.aggregates,
        }

    def summary_table(self) -> str:
        lines = [f"mode: {self.mode}   rows: {len(self.per_cue)}   row errors: {self.row_errors}"]
        width = max((len(k) for k in self.aggregates), default=0)
        for name, agg in self.aggregates.items():
            rate = agg["rate"]
            shown = f"{rate:.2%}" if rate is not None else "n/a"
            lines.append(f"  {name.ljust(width)}  {agg['passed']}/{agg['total']}  {shown}")
        return "\n".join(lines)


def load_corpus(path: str | Path) -> list[CorpusRow]:
    """Parse a JSONL corpus; any malformed line is a corpus-level error."""
    corpus_path = Path(path)
    if not corpus_path.exists():
        raise CorpusFormatError(f"corpus file not found: {corpus_path}")
    rows: list[CorpusRow] = []
    for lineno, line in enumerate(corpus_path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"line {lineno}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise CorpusFormatError(f"line {lineno}: row must be a JSON object")
        missing = [k for k in ("cue_id", "time_frame", "narrative") if k not in data]
        if missing:
            raise CorpusFormatError(f"line {lineno}: missing field(s) {missing}")
        rows.append(
            CorpusRow(
                cue_id=str(data["cue_id"]),
                time_frame=str(data["time_frame"]),
                narrative=str(data["narrative"]),
                user_context=str(data.get("user_context", "")),
                expert=data.get("expert"),
            )
        )
    return rows


def _evaluate_row(row: CorpusRow, mode: str, grader: RubricGrader | None) -> RowReport:
    report = RowReport(cue_id=row.cue_id)
    if mode in ("structural", "all"):
        frame = TimeFrame(label=row.time_frame, approximate_days=1)
        report.format_ok = format_check(row.narrative, frame)
        report.tense_ok = tense_check(row.narrative)
    if mode in ("checklist", "all"):
        try:
            report.checklist = grader.checklist_grade(row.narrative, row.user_context)
        except (GraderParseError, GatewayError) as exc:
            report.errors.append(f"checklist: {exc}")
    if mode in ("comparison", "all"):
        if row.expert is None:
            report.errors.append("comparison: row has no expert column")
        else:
            try:
                report.comparison = grader.comparison_grade(
                    row.narrative, row.expert, row.user_context
                )
            except (GraderParseError, GatewayError) as exc:
                report.errors.append(f"comparison: {exc}")
    if mode in ("classify", "all"):
        try:
            report.classification = grader.classify(row.narrative)
        except (GraderParseError, GatewayError) as exc:
            report.errors.append(f"classify: {exc}")
    return report


def eval_batch(
    corpus_ref: str | Path,
    mode: str,
    grader: RubricGrader | None = None,
    parallelism: int = 1,
) -> EvalReport:
    """Evaluate a corpus; per-row grader failures land in the row, not the batch."""
    if mode not in EVAL_MODES:
        raise ValueError(f"mode must be one of {EVAL_MODES}")
    if mode != "structural" and grader is None:
        raise ValueError(f"mode {mode!r} requires a grader")
    rows = load_corpus(corpus_ref)
    if parallelism > 1 and rows:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            reports = list(pool.map(lambda r: _evaluate_row(r, mode, grader), rows))
    else:
        reports = [_evaluate_row(row, mode, grader) for row in rows]
    report = EvalReport(mode=mode, per_cue=reports)
    report.aggregates = report.recompute_aggregates()
    return report
