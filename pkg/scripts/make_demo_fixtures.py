#!/usr/bin/env python3
"""Regenerate the shipped demo fixtures (catalog + scripted answers).

The scripted answers follow a fixed per-variant mistake pattern so that every
stage/level score cell is exercised:

  index % 6 == 0  fully correct call
  index % 6 == 1  wrong (but present) tool
  index % 6 == 2  correct tool, wrong parameter set
  index % 6 == 3  correct tool and parameters, one wrong content
  index % 6 == 4  hallucinated tool name
  index % 6 == 5  pre-noise gold name (noise correction) when the gold tool
                  was renamed, otherwise a wrong present tool; in the Clean
                  environment this is simply the correct call
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from toolnoise.catalog import (  # noqa: E402
    GoldCall,
    Parameter,
    PriorTurn,
    TestCase,
    Tool,
    serialize_catalog,
)
from toolnoise.augment import (  # noqa: E402
    Trajectory,
    TrajectoryTurn,
    serialize_trajectories,
)
from toolnoise.backend import build_prompt  # noqa: E402
from toolnoise.demo import DEMO_SEED, build_scripted_answers  # noqa: E402
from toolnoise.evaluation import ModelAction  # noqa: E402
from toolnoise.noise import NoiseLevel, build_environment  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def demo_catalog() -> list[TestCase]:
    get_weather = Tool(
        "get_weather",
        "Look up the current weather for a location.",
        (
            Parameter("location", "City or place name to query.", "string", True),
            Parameter(
                "units",
                "Measurement units for the report.",
                "enum",
                False,
                ("celsius", "fahrenheit"),
            ),
        ),
    )
    get_quotes = Tool(
        "get_quotes",
        "Fetch the latest market quotes for one or more ticker symbols.",
        (
            Parameter("symbols", "Comma-separated ticker symbols.", "string", True),
            Parameter("region", "Market region code.", "string", False),
        ),
    )
    predict_age = Tool(
        "predict_age",
        "Predict the ages of one or more people given their names.",
        (
            Parameter("names", "Comma-separated list of first names.", "string", True),
            Parameter("country", "Two-letter country code to condition on.", "string", False),
        ),
    )
    search_events = Tool(
        "search_events",
        "Search public events in a city by category.",
        (
            Parameter("city", "City to search in.", "string", True),
            Parameter(
                "category",
                "Kind of event to look for.",
                "enum",
                True,
                ("music", "sports", "arts"),
            ),
            Parameter("free_only", "Restrict to free events.", "boolean", False),
        ),
    )
    convert_currency = Tool(
        "convert_currency",
        "Convert an amount between two currencies at the latest rate.",
        (
            Parameter("amount", "Amount to convert.", "number", True),
            Parameter("from_currency", "ISO code of the source currency.", "string", True),
            Parameter("to_currency", "ISO code of the target currency.", "string", True),
        ),
    )
    summarize_text = Tool(
        "summarize_text",
        "Produce a short summary of a passage of text.",
        (
            Parameter("text", "The passage to summarize.", "string", True),
            Parameter("max_sentences", "Upper bound on summary length.", "integer", False),
        ),
    )

    return [
        TestCase(
            id="demo-01",
            scenario="information",
            query="What's the weather like in Paris right now, in celsius?",
            tools=(get_weather, search_events),
            gold=GoldCall(
                "get_weather",
                frozenset({"location", "units"}),
                {"location": "Paris", "units": "celsius"},
            ),
        ),
        TestCase(
            id="demo-02",
            scenario="finance",
            query="Get me quotes for AAPL and MSFT from the US market.",
            tools=(get_quotes, convert_currency),
            gold=GoldCall(
                "get_quotes",
                frozenset({"symbols", "region"}),
                {"symbols": "AAPL,MSFT", "region": "US"},
            ),
        ),
        TestCase(
            id="demo-03",
            scenario="lifestyle",
            query="I have two friends, Maria and Juan, from Spain. How old are they likely to be?",
            tools=(predict_age, summarize_text),
            gold=GoldCall(
                "predict_age",
                frozenset({"names", "country"}),
                {"names": "Maria,Juan", "country": "ES"},
            ),
        ),
        TestCase(
            id="demo-04",
            scenario="information",
            query="Are there any free music events in Berlin this week?",
            tools=(search_events, get_weather),
            gold=GoldCall(
                "search_events",
                frozenset({"city", "category", "free_only"}),
                {"city": "Berlin", "category": "music", "free_only": "true"},
            ),
        ),
        TestCase(
            id="demo-05",
            scenario="finance",
            query="How many euros do I get for 250 US dollars?",
            tools=(convert_currency, get_quotes),
            gold=GoldCall(
                "convert_currency",
                frozenset({"amount", "from_currency", "to_currency"}),
                {"amount": "250", "from_currency": "USD", "to_currency": "EUR"},
            ),
        ),
        TestCase(
            id="demo-06",
            scenario="lifestyle",
            query="Summarize this article in three sentences: The city council voted...",
            tools=(summarize_text, predict_age),
            gold=GoldCall(
                "summarize_text",
                frozenset({"text", "max_sentences"}),
                {"text": "The city council voted...", "max_sentences": "3"},
            ),
            prior_turns=(
                PriorTurn(
                    thought="I should first check how old the author is likely to be.",
                    tool_name="predict_age",
                    arguments={"names": "Ada"},
                    observation='{"ages": {"Ada": 36}}',
                ),
                PriorTurn(
                    thought="The age alone does not summarize the article; I need the text tool.",
                    tool_name="summarize_text",
                    arguments={"text": "The city council voted...", "max_sentences": "5"},
                    observation="The council approved the new budget.",
                ),
            ),
        ),
    ]


def demo_trajectories(cases: list[TestCase]) -> list[Trajectory]:
    """Ten two-turn trajectories: the gold call followed by a finish turn."""
    out = []
    for i in range(10):
        case = cases[i % len(cases)]
        out.append(
            Trajectory(
                query=case.query if i < len(cases) else f"{case.query} (variant {i})",
                source_case=case.id,
                final_answer="Task finished.",
                turns=(
                    TrajectoryTurn(
                        thought=f"The {case.gold.tool_name} tool answers this directly.",
                        action=ModelAction(
                            tool_name=case.gold.tool_name,
                            arguments=dict(case.gold.contents),
                        ),
                        observation='{"status": "ok"}',
                    ),
                    TrajectoryTurn(
                        thought="I have everything needed to answer.",
                        action=ModelAction(
                            tool_name="finish", arguments={"answer": "Task finished."}
                        ),
                        observation="",
                    ),
                ),
            )
        )
    return out


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    cases = demo_catalog()
    (FIXTURES / "demo_catalog.json").write_text(serialize_catalog(cases), encoding="utf-8")

    answers: dict[str, str] = {}
    for level in NoiseLevel:
        env = build_environment(cases, level, DEMO_SEED)
        answers.update(build_scripted_answers(env))
    (FIXTURES / "demo_answers.json").write_text(
        json.dumps(answers, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    (FIXTURES / "demo_trajectories.json").write_text(
        serialize_trajectories(demo_trajectories(cases)), encoding="utf-8"
    )

    clean = build_environment(cases, NoiseLevel.CLEAN, DEMO_SEED)
    golden = []
    for case in (clean[0], clean[-1]):  # demo-01 (plain) and demo-06 (prior turns)
        golden.append(f"=== {case.id} ===")
        for msg in build_prompt(case):
            golden.append(f"--- {msg.role} ---")
            golden.append(msg.content)
    (FIXTURES / "demo_prompts.txt").write_text("\n".join(golden) + "\n", encoding="utf-8")

    print(f"wrote demo fixtures under {FIXTURES}")


if __name__ == "__main__":
    main()
