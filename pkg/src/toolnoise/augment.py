"""Training-data pipeline: query dedup, trajectory rewriting, plan sampling,
and per-turn record export."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .backend import (
    SYSTEM_TEMPLATE,
    USER_TEMPLATE,
    ChatMessage,
    render_action_text,
    render_tool_document,
)
from .catalog import canonical_dumps
from .evaluation import ModelAction, RESERVED_TOOLS, _stringify
from .noise import NoiseLevel, PerturbedCase

MAX_TURNS = 9


class RewriteError(ValueError):
    """A trajectory mentions a name the perturbation mapping does not cover."""

    def __init__(self, turn_index: int, name: str):
        self.turn_index = turn_index
        self.name = name
        super().__init__(f"turn {turn_index}: unknown name {name!r}")


@dataclass(frozen=True)
class TrajectoryTurn:
    thought: str
    action: ModelAction
    observation: str


@dataclass(frozen=True)
class Trajectory:
    query: str
    turns: tuple[TrajectoryTurn, ...]
    final_answer: str
    source_case: str

    def __post_init__(self) -> None:
        if len(self.turns) > MAX_TURNS:
            raise ValueError(f"trajectory exceeds {MAX_TURNS} turns")


@dataclass(frozen=True)
class AugmentationPlan:
    counts: Mapping[NoiseLevel, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", dict(self.counts))

    @classmethod
    def default(cls) -> "AugmentationPlan":
        return cls(
            {
                NoiseLevel.SLIGHT: 3000,
                NoiseLevel.MEDIUM: 3000,
                NoiseLevel.HEAVY: 3000,
                NoiseLevel.UNION: 1500,
            }
        )

    def scaled(self, factor: float) -> "AugmentationPlan":
        return AugmentationPlan({lv: int(n * factor) for lv, n in self.counts.items()})


@dataclass(frozen=True)
class TrainingRecord:
    messages: tuple[ChatMessage, ...]
    target: str


# ---------------------------------------------------------------------------
# Rouge-L and query dedup
# ---------------------------------------------------------------------------


def _tokenize(text: str) -> list[str]:
    return text.lower().split()


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    """Token-level LCS F-measure (beta = 1) over lowercased whitespace tokens."""
    cand = _tokenize(candidate)
    ref = _tokenize(reference)
    if not cand and not ref:
        return 1.0
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2.0 * precision * recall / (precision + recall)


def dedup_queries(
    candidates: Iterable[str], pool: Iterable[str], threshold: float = 0.55
) -> list[str]:
    """Keep candidates whose Rouge-L against the pool and all previously kept
    candidates stays at or below the threshold; kept items join the pool."""
    if not (0.0 < threshold <= 1.0):
        raise ValueError("threshold must be in (0, 1]")
    pool_all = list(pool)
    kept: list[str] = []
    for cand in candidates:
        if all(rouge_l(cand, other) <= threshold for other in pool_all):
            kept.append(cand)
            pool_all.append(cand)
    return kept


# ---------------------------------------------------------------------------
# Trajectory rewriting into a perturbed environment
# ---------------------------------------------------------------------------

_WORD_TOKEN = re.compile(r"^[A-Za-z0-9_]+$")


def _prose_renames(case: PerturbedCase) -> dict[str, str]:
    """Identifier replacements applicable to free text (whole tokens only)."""
    renames: dict[str, str] = {}
    for orig, new in case.mapping.tool_renames.items():
        if _WORD_TOKEN.match(orig):
            renames[orig] = new
    for (_, orig), new in case.mapping.param_renames.items():
        if _WORD_TOKEN.match(orig):
            renames[orig] = new
    return renames


def _rename_in_text(text: str, renames: Mapping[str, str]) -> str:
    if not renames:
        return text
    pattern = re.compile(
        r"\b(" + "|".join(re.escape(k) for k in sorted(renames, key=len, reverse=True)) + r")\b"
    )
    return pattern.sub(lambda m: renames[m.group(1)], text)


def _original_param_names(case: PerturbedCase, original_tool: str) -> set[str]:
    renamed = {
        p for (t, p) in case.mapping.param_renames if t == original_tool
    }
    current_tool = case.mapping.tool_renames.get(original_tool, original_tool)
    injected = case.mapping.injected_params.get(original_tool)
    for tool in case.tools:
        if tool.name == current_tool:
            current = set(tool.parameter_names())
            renamed_to = {
                v for (t, _), v in case.mapping.param_renames.items() if t == original_tool
            }
            if injected is not None:
                current.discard(injected[0].name)
            return (current - renamed_to) | renamed
    return renamed


def rewrite_trajectory(traj: Trajectory, case: PerturbedCase) -> Trajectory:
    """Re-express a clean-environment trajectory in a perturbed environment.

    Tool and parameter names are replaced via the case's name mapping, and
    calls to tools that gained an addendum parameter acquire it with its
    dictated value. Prose (thoughts, observations) only has exact identifier
    tokens replaced.
    """
    if traj.source_case != case.base:
        raise RewriteError(0, traj.source_case)
    prose = _prose_renames(case)
    original_tools = case.original_tool_names()
    turns: list[TrajectoryTurn] = []
    for i, turn in enumerate(traj.turns):
        tool = turn.action.tool_name
        if tool in RESERVED_TOOLS:
            new_tool = tool
            args = dict(turn.action.arguments)
        elif tool in original_tools:
            new_tool = case.mapping.tool_renames.get(tool, tool)
            known = _original_param_names(case, tool)
            args = {}
            for name, value in turn.action.arguments.items():
                if name not in known:
                    raise RewriteError(i, name)
                args[case.mapping.param_renames.get((tool, name), name)] = value
            injected = case.mapping.injected_params.get(tool)
            if injected is not None:
                args[injected[0].name] = injected[1]
        else:
            raise RewriteError(i, tool)
        turns.append(
            TrajectoryTurn(
                thought=_rename_in_text(turn.thought, prose),
                action=ModelAction(tool_name=new_tool, arguments=args),
                observation=_rename_in_text(turn.observation, prose),
            )
        )
    return Trajectory(
        query=traj.query,
        turns=tuple(turns),
        final_answer=_rename_in_text(traj.final_answer, prose),
        source_case=traj.source_case,
    )


# ---------------------------------------------------------------------------
# Plan sampling and record export
# ---------------------------------------------------------------------------

_SAMPLE_ORDER = (NoiseLevel.SLIGHT, NoiseLevel.MEDIUM, NoiseLevel.HEAVY, NoiseLevel.UNION)


def sample_plan(
    trajectories: Sequence[Trajectory], plan: AugmentationPlan, seed: int
) -> dict[NoiseLevel, list[Trajectory]]:
    """Seeded per-level sampling without replacement; Clean keeps everything."""
    rng = random.Random(seed)
    out: dict[NoiseLevel, list[Trajectory]] = {NoiseLevel.CLEAN: list(trajectories)}
    for level in _SAMPLE_ORDER:
        count = plan.counts.get(level, 0)
        if count > len(trajectories):
            raise ValueError(
                f"plan wants {count} trajectories for {level.value}, only "
                f"{len(trajectories)} available"
            )
        out[level] = [trajectories[i] for i in sorted(rng.sample(range(len(trajectories)), count))]
    return out


def export_records(
    per_level: Mapping[NoiseLevel, Sequence[tuple[Trajectory, PerturbedCase]]]
) -> list[TrainingRecord]:
    """One training record per trajectory turn, with prior turns as context."""
    records: list[TrainingRecord] = []
    for level in [NoiseLevel.CLEAN, *_SAMPLE_ORDER]:
        for traj, case in per_level.get(level, ()):  # type: ignore[call-overload]
            base = [
                ChatMessage(
                    "system",
                    SYSTEM_TEMPLATE.format(tool_document=render_tool_document(case.tools)),
                ),
                ChatMessage("user", USER_TEMPLATE.format(query=traj.query)),
            ]
            for k, turn in enumerate(traj.turns):
                messages = list(base)
                for prev in traj.turns[:k]:
                    messages.append(
                        ChatMessage(
                            "assistant",
                            render_action_text(
                                prev.thought, prev.action.tool_name, prev.action.arguments
                            ),
                        )
                    )
                    messages.append(ChatMessage("user", f"Observation: {prev.observation}"))
                target = render_action_text(
                    turn.thought, turn.action.tool_name, turn.action.arguments
                )
                records.append(TrainingRecord(messages=tuple(messages), target=target))
    return records


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def trajectory_to_dict(traj: Trajectory) -> dict[str, Any]:
    return {
        "query": traj.query,
        "source_case": traj.source_case,
        "final_answer": traj.final_answer,
        "turns": [
            {
                "thought": t.thought,
                "tool": t.action.tool_name,
                "arguments": {k: t.action.arguments[k] for k in sorted(t.action.arguments)},
                "observation": t.observation,
            }
            for t in traj.turns
        ],
    }


def trajectory_from_dict(d: Mapping[str, Any]) -> Trajectory:
    return Trajectory(
        query=str(d["query"]),
        source_case=str(d["source_case"]),
        final_answer=str(d.get("final_answer", "")),
        turns=tuple(
            TrajectoryTurn(
                thought=str(t.get("thought", "")),
                action=ModelAction(
                    tool_name=str(t["tool"]),
                    arguments={str(k): _stringify(v) for k, v in t.get("arguments", {}).items()},
                ),
                observation=str(t.get("observation", "")),
            )
            for t in d.get("turns", [])
        ),
    )


def serialize_trajectories(trajectories: Iterable[Trajectory]) -> str:
    return canonical_dumps({"trajectories": [trajectory_to_dict(t) for t in trajectories]})


def parse_trajectories(document: str | bytes) -> list[Trajectory]:
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    data = json.loads(document)
    return [trajectory_from_dict(t) for t in data["trajectories"]]


def training_record_to_line(record: TrainingRecord) -> str:
    return json.dumps(
        {
            "messages": [{"role": m.role, "content": m.content} for m in record.messages],
            "target": record.target,
        },
        ensure_ascii=False,
    )
