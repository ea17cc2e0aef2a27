import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toolnoise.catalog import GoldCall, Parameter, Tool
from toolnoise.evaluation import (
    EvalRecord,
    ModelAction,
    ReactParseError,
    StageScores,
    detect_hallucination,
    detect_noise_correction,
    evaluate_case,
    parse_react,
    score_action,
)
from toolnoise.noise import NameMapping, NoiseLevel, PerturbationTarget, PerturbedCase

GOLD = GoldCall("get_weather", frozenset({"location", "units"}),
                {"location": "Paris", "units": "metric"})


def make_case(tools, gold, mapping=None, level=NoiseLevel.SLIGHT):
    return PerturbedCase(
        id="c1__x",
        base="c1",
        scenario="information",
        query="weather?",
        level=level,
        target=PerturbationTarget.BOTH,
        seed=0,
        tools=tuple(tools),
        gold=gold,
        mapping=mapping or NameMapping(),
    )


class TestParseReact:
    def test_plain_block(self):
        text = (
            "Thought: check the forecast\n"
            "Action: get_weather\n"
            'Action Input: {"location": "Paris", "units": "metric"}\n'
        )
        action = parse_react(text)
        assert action.tool_name == "get_weather"
        assert action.arguments == {"location": "Paris", "units": "metric"}
        assert action.thought == "check the forecast"

    def test_last_complete_block_wins(self):
        text = (
            "Thought: first try\n"
            "Action: alpha\n"
            'Action Input: {"a": "1"}\n'
            "Observation: nope\n"
            "Thought: second try\n"
            "Action: beta\n"
            'Action Input: {"b": "2"}\n'
        )
        action = parse_react(text)
        assert action.tool_name == "beta"
        assert action.arguments == {"b": "2"}
        assert action.thought == "second try"

    def test_incomplete_final_block_falls_back(self):
        text = (
            "Action: alpha\n"
            'Action Input: {"a": "1"}\n'
            "Action: beta\n"
            "no input follows here"
        )
        assert parse_react(text).tool_name == "alpha"

    def test_code_fences_stripped(self):
        text = 'Action: tool_x\nAction Input:\n```json\n{"k": "v"}\n```\n'
        action = parse_react(text)
        assert action.tool_name == "tool_x"
        assert action.arguments == {"k": "v"}

    def test_python_literal_fallback(self):
        text = "Action: tool_x\nAction Input: {'k': 'v', 'n': 3}\n"
        action = parse_react(text)
        assert action.arguments == {"k": "v", "n": "3"}

    def test_scalar_coercion(self):
        text = 'Action: t\nAction Input: {"a": true, "b": null, "c": 2.5, "d": 7}\n'
        args = parse_react(text).arguments
        assert args == {"a": "true", "b": "null", "c": "2.5", "d": "7"}

    def test_no_action_line_raises(self):
        with pytest.raises(ReactParseError):
            parse_react("I cannot decide which tool to use.")

    def test_action_without_input_raises(self):
        with pytest.raises(ReactParseError):
            parse_react("Action: tool_x\nno structured input anywhere")

    def test_surrounding_prose_tolerated(self):
        text = (
            "Sure, here is my plan.\n"
            "Action: tool_x\n"
            'Action Input: {"k": "v"}\n'
            "I hope that answers the question."
        )
        assert parse_react(text).tool_name == "tool_x"

    def test_quoted_tool_name_cleaned(self):
        assert parse_react('Action: `tool_x`\nAction Input: {}').tool_name == "tool_x"


class TestStageScores:
    def test_full_credit(self):
        action = ModelAction("get_weather", {"location": "Paris", "units": "metric"})
        assert score_action(action, GOLD) == StageScores(1, 1, 1)

    def test_wrong_tool_gates_everything(self):
        action = ModelAction("get_quotes", {"location": "Paris", "units": "metric"})
        assert score_action(action, GOLD) == StageScores(0, 0, 0)

    def test_missing_parameter_gates_content(self):
        action = ModelAction("get_weather", {"location": "Paris"})
        assert score_action(action, GOLD) == StageScores(1, 0, 0)

    def test_extra_parameter_fails_identification(self):
        action = ModelAction(
            "get_weather", {"location": "Paris", "units": "metric", "extra": "x"}
        )
        assert score_action(action, GOLD) == StageScores(1, 0, 0)

    def test_wrong_content(self):
        action = ModelAction("get_weather", {"location": "London", "units": "metric"})
        assert score_action(action, GOLD) == StageScores(1, 1, 0)

    def test_outer_whitespace_ignored(self):
        action = ModelAction("get_weather", {"location": " Paris ", "units": "metric\n"})
        assert score_action(action, GOLD) == StageScores(1, 1, 1)

    def test_case_preserved(self):
        action = ModelAction("get_weather", {"location": "paris", "units": "metric"})
        assert score_action(action, GOLD) == StageScores(1, 1, 0)

    def test_numeric_text_not_normalized(self):
        gold = GoldCall("t", frozenset({"n"}), {"n": "2"})
        assert score_action(ModelAction("t", {"n": "2.0"}), gold).s_cf == 0
        assert score_action(ModelAction("t", {"n": "2"}), gold).s_cf == 1

    def test_gating_invariant_enforced(self):
        with pytest.raises(ValueError):
            StageScores(0, 1, 1)
        with pytest.raises(ValueError):
            StageScores(1, 0, 1)

    @given(
        st.text(string.ascii_lowercase, min_size=1, max_size=6),
        st.dictionaries(
            st.text(string.ascii_lowercase, min_size=1, max_size=4),
            st.text(string.printable, max_size=6),
            max_size=4,
        ),
    )
    @settings(max_examples=300, deadline=None)
    def test_gating_always_holds(self, name, args):
        scores = score_action(ModelAction(name, args), GOLD)
        assert scores.s_cf <= scores.s_pi <= scores.s_ts


TOOLS = (
    Tool("get_weather", "weather", (Parameter("location", "d", "string", True),)),
    Tool("get_quotes", "quotes", (Parameter("symbols", "d", "string", True),)),
)


class TestHallucination:
    def test_present_tool_is_not_hallucinated(self):
        assert not detect_hallucination(ModelAction("get_quotes", {}), TOOLS)

    def test_absent_tool_is_hallucinated(self):
        assert detect_hallucination(ModelAction("make_coffee", {}), TOOLS)

    def test_reserved_meta_tools_excluded(self):
        assert not detect_hallucination(ModelAction("finish", {}), TOOLS)
        assert not detect_hallucination(ModelAction("ask_to_user", {}), TOOLS)

    def test_noise_correction_detected(self):
        mapping = NameMapping(tool_renames={"get_weather": "gte_wthr"})
        renamed = (Tool("gte_wthr", "weather", TOOLS[0].parameters), TOOLS[1])
        gold = GoldCall("gte_wthr", frozenset({"location"}), {"location": "Paris"})
        case = make_case(renamed, gold, mapping)
        record = evaluate_case(
            case, 'Action: get_weather\nAction Input: {"location": "Paris"}'
        )
        assert record.hallucinated
        assert record.noise_corrected
        assert record.scores == StageScores(0, 0, 0)

    def test_unrenamed_hallucination_is_not_correction(self):
        case = make_case(TOOLS, GOLD)
        record = evaluate_case(case, 'Action: make_coffee\nAction Input: {}')
        assert record.hallucinated
        assert not record.noise_corrected

    def test_detect_noise_correction_requires_renamed_name(self):
        mapping = NameMapping(tool_renames={"get_weather": "gte_wthr"})
        case = make_case(TOOLS, GOLD, mapping)
        assert detect_noise_correction(ModelAction("get_weather", {}), case)
        assert not detect_noise_correction(ModelAction("get_quotes", {}), case)


class TestEvaluateCase:
    def test_parse_failure_scores_zero(self):
        record = evaluate_case(make_case(TOOLS, GOLD), "I give up.")
        assert record.parse_failed
        assert record.scores == StageScores(0, 0, 0)
        assert not record.hallucinated

    def test_full_credit_end_to_end(self):
        out = (
            "Thought: forecast\nAction: get_weather\n"
            'Action Input: {"location": "Paris", "units": "metric"}'
        )
        record = evaluate_case(make_case(TOOLS, GOLD), out)
        assert record.scores == StageScores(1, 1, 1)
        assert not record.parse_failed


class TestEvalRecordInvariants:
    def test_parse_failed_must_zero(self):
        with pytest.raises(ValueError):
            EvalRecord("c", NoiseLevel.CLEAN, "s", StageScores(1, 0, 0), parse_failed=True)

    def test_hallucinated_cannot_score(self):
        with pytest.raises(ValueError):
            EvalRecord("c", NoiseLevel.CLEAN, "s", StageScores(1, 0, 0), hallucinated=True)

    def test_correction_implies_hallucination(self):
        with pytest.raises(ValueError):
            EvalRecord(
                "c", NoiseLevel.CLEAN, "s", StageScores(0, 0, 0), noise_corrected=True
            )
