"""Parse model transcripts and score them in three gated stages.

The stages are tool selection, parameter identification, and content filling;
each later stage can only score 1 if the previous one did.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .catalog import GoldCall, Tool
from .noise import NoiseLevel, PerturbedCase

# Meta-tools that are always available and never count as hallucinations.
RESERVED_TOOLS = frozenset({"finish", "ask_to_user"})

_ACTION_RE = re.compile(r"^[ \t]*Action:[ \t]*(.+?)[ \t]*$", re.MULTILINE)
_THOUGHT_RE = re.compile(r"^[ \t]*Thought:[ \t]*(.*?)[ \t]*$", re.MULTILINE)
_ACTION_INPUT_RE = re.compile(r"Action Input:", re.MULTILINE)


class ReactParseError(ValueError):
    pass


@dataclass(frozen=True)
class ModelAction:
    tool_name: str
    arguments: Mapping[str, str]
    thought: str | None = None
    raw: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "arguments", dict(self.arguments))


@dataclass(frozen=True)
class StageScores:
    s_ts: int
    s_pi: int
    s_cf: int

    def __post_init__(self) -> None:
        if not (self.s_cf <= self.s_pi <= self.s_ts):
            raise ValueError(f"gating violated: {self}")


ZERO_SCORES = StageScores(0, 0, 0)


@dataclass(frozen=True)
class EvalRecord:
    case_id: str
    level: NoiseLevel
    scenario: str
    scores: StageScores
    hallucinated: bool = False
    noise_corrected: bool = False
    parse_failed: bool = False

    def __post_init__(self) -> None:
        if self.parse_failed and self.scores != ZERO_SCORES:
            raise ValueError("parse failure must score 0 at every stage")
        if self.hallucinated and self.scores.s_ts != 0:
            raise ValueError("a hallucinated tool cannot score tool selection")
        if self.noise_corrected and not self.hallucinated:
            raise ValueError("noise correction implies hallucination")


def _strip_fences(text: str) -> str:
    return re.sub(r"```[a-zA-Z]*", "", text).replace("```", "")


def _stringify(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, (int, float)):
        return str(value)
    return json.dumps(value, ensure_ascii=False)


def _extract_object(text: str) -> dict[str, Any]:
    """Pull the first balanced ``{...}`` out of free text and parse it."""
    start = text.find("{")
    if start < 0:
        raise ReactParseError("no object found in Action Input")
    depth = 0
    in_string: str | None = None
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == in_string:
                in_string = None
            continue
        if ch in "\"'":
            in_string = ch
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                blob = text[start : i + 1]
                for loader in (json.loads, ast.literal_eval):
                    try:
                        obj = loader(blob)
                    except (ValueError, SyntaxError):
                        continue
                    if isinstance(obj, dict):
                        return obj
                raise ReactParseError(f"unparseable Action Input: {blob!r}")
    raise ReactParseError("unbalanced braces in Action Input")


def _clean_name(name: str) -> str:
    return name.strip().strip("`'\"").rstrip(".,")


def parse_react(text: str) -> ModelAction:
    """Extract the last complete Thought/Action/Action Input block.

    Tolerates surrounding prose and code fences; fails if no Action line or
    no parseable Action Input object is present.
    """
    stripped = _strip_fences(text)
    actions = list(_ACTION_RE.finditer(stripped))
    if not actions:
        raise ReactParseError("no Action line found")
    for action_match in reversed(actions):
        tail = stripped[action_match.end() :]
        input_match = _ACTION_INPUT_RE.search(tail)
        if input_match is None:
            continue
        try:
            args = _extract_object(tail[input_match.end() :])
        except ReactParseError:
            continue
        thought = None
        thoughts = list(_THOUGHT_RE.finditer(stripped, 0, action_match.start()))
        if thoughts:
            thought = thoughts[-1].group(1)
        return ModelAction(
            tool_name=_clean_name(action_match.group(1)),
            arguments={str(k): _stringify(v) for k, v in args.items()},
            thought=thought,
            raw=text,
        )
    raise ReactParseError("no complete Action/Action Input block found")


# ---------------------------------------------------------------------------
# Stage scores
# ---------------------------------------------------------------------------


def score_tool_selection(action: ModelAction, gold: GoldCall) -> int:
    return int(action.tool_name == gold.tool_name)


def score_parameter_identification(s_ts: int, action: ModelAction, gold: GoldCall) -> int:
    return int(s_ts == 1 and set(action.arguments) == set(gold.parameters))


def normalize_content(value: str) -> str:
    # Exact match modulo outer whitespace; case is preserved.
    return value.strip()


def score_content_filling(s_pi: int, action: ModelAction, gold: GoldCall) -> int:
    if s_pi != 1:
        return 0
    for name in gold.parameters:
        if normalize_content(action.arguments.get(name, "")) != normalize_content(
            gold.contents[name]
        ):
            return 0
    return 1


def score_action(action: ModelAction, gold: GoldCall) -> StageScores:
    s_ts = score_tool_selection(action, gold)
    s_pi = score_parameter_identification(s_ts, action, gold)
    s_cf = score_content_filling(s_pi, action, gold)
    return StageScores(s_ts, s_pi, s_cf)


def detect_hallucination(action: ModelAction, tools: Sequence[Tool]) -> bool:
    """True when the chosen tool exists nowhere in the presented environment."""
    if action.tool_name in RESERVED_TOOLS:
        return False
    return action.tool_name not in {t.name for t in tools}


def detect_noise_correction(action: ModelAction, case: PerturbedCase) -> bool:
    """True when the model answered a pre-noise name that noise had replaced."""
    renamed = case.mapping.tool_renames.get(action.tool_name)
    return renamed is not None and renamed != action.tool_name


def evaluate_action(case: PerturbedCase, action: ModelAction) -> EvalRecord:
    scores = score_action(action, case.gold)
    hallucinated = detect_hallucination(action, case.tools)
    noise_corrected = hallucinated and detect_noise_correction(action, case)
    return EvalRecord(
        case_id=case.id,
        level=case.level,
        scenario=case.scenario,
        scores=scores,
        hallucinated=hallucinated,
        noise_corrected=noise_corrected,
    )


def evaluate_case(case: PerturbedCase, output: str) -> EvalRecord:
    """Parse raw model output and score it; parse failures score 0 everywhere."""
    try:
        action = parse_react(output)
    except ReactParseError:
        return EvalRecord(
            case_id=case.id,
            level=case.level,
            scenario=case.scenario,
            scores=ZERO_SCORES,
            parse_failed=True,
        )
    return evaluate_action(case, action)


# ---------------------------------------------------------------------------
# Transcript files: one JSON object per line, either raw text or a structured
# function-call form ({"name": ..., "arguments": {...}}).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TranscriptEntry:
    case_id: str
    output: str | None = None
    call: ModelAction | None = None
    error: str | None = None


def transcript_entry_to_dict(entry: TranscriptEntry) -> dict[str, Any]:
    d: dict[str, Any] = {"id": entry.case_id}
    if entry.output is not None:
        d["output"] = entry.output
    if entry.call is not None:
        d["call"] = {
            "name": entry.call.tool_name,
            "arguments": {k: entry.call.arguments[k] for k in sorted(entry.call.arguments)},
        }
    if entry.error is not None:
        d["error"] = entry.error
    return d


def transcript_entry_from_dict(d: Mapping[str, Any]) -> TranscriptEntry:
    call = None
    if "call" in d:
        raw = d["call"]
        call = ModelAction(
            tool_name=str(raw["name"]),
            arguments={str(k): _stringify(v) for k, v in raw.get("arguments", {}).items()},
        )
    return TranscriptEntry(
        case_id=str(d["id"]),
        output=d.get("output"),
        call=call,
        error=d.get("error"),
    )


def evaluate_transcript_entry(case: PerturbedCase, entry: TranscriptEntry) -> EvalRecord:
    if entry.call is not None:
        return evaluate_action(case, entry.call)
    if entry.output is not None:
        return evaluate_case(case, entry.output)
    return EvalRecord(
        case_id=case.id,
        level=case.level,
        scenario=case.scenario,
        scores=ZERO_SCORES,
        parse_failed=True,
    )
