"""Designed scripted answers for the shipped demo catalog.

Each environment variant gets a deterministic mistake pattern chosen by its
position, so the aggregate score table exercises every stage/level cell:
correct, wrong tool, wrong parameter set, wrong content, hallucination, and
pre-noise name (noise correction).
"""

from __future__ import annotations

import json
from typing import Mapping, Sequence

from .noise import NoiseLevel, PerturbedCase

DEMO_SEED = 42

HALLUCINATED_TOOL = "zzz_unreal_tool_zzz"

PATTERNS = (
    "correct",
    "wrong_tool",
    "wrong_params",
    "wrong_content",
    "hallucinate",
    "noise_corrected",
)


def _render(tool: str, arguments: Mapping[str, str]) -> str:
    args = json.dumps({k: arguments[k] for k in sorted(arguments)}, ensure_ascii=False)
    return f"Thought: I will call the tool now.\nAction: {tool}\nAction Input: {args}"


def scripted_answer(case: PerturbedCase, pattern: str) -> str:
    """Build one designed answer against the case's (perturbed) gold call."""
    gold = case.gold
    other_tools = [n for n in case.tool_names() if n != gold.tool_name]
    if pattern == "correct":
        return _render(gold.tool_name, gold.contents)
    if pattern == "wrong_tool":
        return _render(other_tools[0], gold.contents)
    if pattern == "wrong_params":
        dropped = dict(gold.contents)
        dropped.pop(sorted(dropped)[0])
        return _render(gold.tool_name, dropped)
    if pattern == "wrong_content":
        altered = dict(gold.contents)
        first = sorted(altered)[0]
        altered[first] = altered[first] + "_wrong"
        return _render(gold.tool_name, altered)
    if pattern == "hallucinate":
        assert HALLUCINATED_TOOL not in case.tool_names()
        return _render(HALLUCINATED_TOOL, gold.contents)
    if pattern == "noise_corrected":
        if case.level is NoiseLevel.CLEAN:
            # No noise to "correct"; answering the original name is correct.
            return _render(gold.tool_name, gold.contents)
        original = case.original_tool_name(gold.tool_name)
        if original != gold.tool_name:
            return _render(original, gold.contents)
        # Gold tool escaped renaming under this seed: fall back to a plain
        # wrong-tool answer so the tool-selection score is still 0.
        return _render(other_tools[0], gold.contents)
    raise ValueError(f"unknown pattern {pattern!r}")


def build_scripted_answers(env: Sequence[PerturbedCase]) -> dict[str, str]:
    return {
        case.id: scripted_answer(case, PATTERNS[i % len(PATTERNS)])
        for i, case in enumerate(env)
    }


# Aggregate table implied by the pattern assignment above; per level the
# variants cycle through the six patterns, and only "correct" (all levels)
# plus "noise_corrected" in Clean score past tool selection and beyond.
EXPECTED_MEANS = {
    ("clean", "ts"): 66.67,
    ("clean", "pi"): 50.0,
    ("clean", "cf"): 33.33,
    ("slight", "ts"): 50.0,
    ("slight", "pi"): 33.33,
    ("slight", "cf"): 16.67,
    ("medium", "ts"): 50.0,
    ("medium", "pi"): 33.33,
    ("medium", "cf"): 16.67,
    ("heavy", "ts"): 50.0,
    ("heavy", "pi"): 33.33,
    ("heavy", "cf"): 16.67,
    ("union", "ts"): 50.0,
    ("union", "pi"): 33.33,
    ("union", "cf"): 16.67,
}

# Per-level content-filling score vectors implied by the patterns; used to
# cross-check the ANOVA output against an independent implementation.
EXPECTED_CF_GROUPS = {
    "clean": (1, 0, 0, 0, 0, 1),
    "slight": (1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0),
    "medium": (1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0),
    "heavy": (1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0),
    "union": (1, 0, 0, 0, 0, 0),
}


# Flag counts frozen for DEMO_SEED. The "hallucinate" pattern fires once per
# six variants (8 total across the 48 variants); whether a "noise_corrected"
# answer also counts as a hallucination depends on which names the seed
# happened to rename, so these totals are pinned to the seed above.
EXPECTED_HALLUCINATIONS = 9
EXPECTED_NOISE_CORRECTIONS = 1
