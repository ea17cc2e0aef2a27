import random
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toolnoise.catalog import GoldCall, Parameter, Tool
from toolnoise.noise import (
    ExhaustionError,
    NameMapping,
    NoiseError,
    NoiseLevel,
    PerturbationTarget,
    build_environment,
    derive_subseed,
    exchange_tool_names,
    extract_addendum_content,
    inject_addendum_param,
    nonsense_string,
    parse_environment,
    remap_gold,
    reverse_or_nonsense,
    serialize_environment,
    slight_perturb_name,
    _heavy_param_treat,
)


def levenshtein(a: str, b: str) -> int:
    """Independent dynamic-programming edit-distance oracle."""
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


names = st.text(alphabet=string.ascii_lowercase + "_", min_size=1, max_size=20)


class TestSlightPerturb:
    def test_minimum_length_name(self):
        rng = random.Random(0)
        for _ in range(50):
            out = slight_perturb_name("a", rng)
            assert out != "a"
            assert levenshtein("a", out) == 1

    def test_edit_distance_bounds_over_seeded_samples(self):
        rng = random.Random(123)
        name = "predicted"  # 9 chars -> at most 3 edits
        for _ in range(1000):
            out = slight_perturb_name(name, rng)
            assert out != name
            assert 1 <= levenshtein(name, out) <= 3

    @given(names, st.integers(0, 2**32))
    @settings(max_examples=200, deadline=None)
    def test_bound_holds_for_arbitrary_names(self, name, seed):
        out = slight_perturb_name(name, random.Random(seed))
        assert out != name
        assert 1 <= levenshtein(name, out) <= max(1, len(name) // 3)


class TestReverseOrNonsense:
    def test_two_char_reversal_branch(self):
        seen = set()
        for seed in range(50):
            seen.add(reverse_or_nonsense("ab", random.Random(seed), 10))
        assert "ba" in seen

    def test_palindrome_always_replaced(self):
        for seed in range(200):
            assert reverse_or_nonsense("aba", random.Random(seed), 10) != "aba"

    def test_nonsense_branch_length_bounds(self):
        reversed_count = 0
        for seed in range(1000):
            out = reverse_or_nonsense("get_quotes", random.Random(seed), 10)
            assert out != "get_quotes"
            if out == "setouq_teg":
                reversed_count += 1
            else:
                assert 3 <= len(out) <= 10
                assert out.islower()
        assert 300 < reversed_count < 700  # roughly a fair coin


class TestNonsenseString:
    def test_forced_remaining_letter(self):
        existing = set(string.ascii_lowercase) - {"q"}
        assert nonsense_string(random.Random(0), 1, existing) == "q"

    def test_exhaustion(self):
        with pytest.raises(ExhaustionError):
            nonsense_string(random.Random(0), 1, set(string.ascii_lowercase))

    def test_thousand_draws_all_distinct(self):
        rng = random.Random(7)
        existing: set[str] = set()
        for _ in range(1000):
            s = nonsense_string(rng, 10, existing)
            assert 3 <= len(s) <= 10
            assert s not in existing
            existing.add(s)


def _tools(names_):
    return [Tool(n, f"tool {n}", ()) for n in names_]


class TestExchange:
    def test_two_tools_swap(self):
        mapping = exchange_tool_names(_tools(["A", "B"]), random.Random(0))
        assert mapping.tool_renames == {"A": "B", "B": "A"}

    def test_three_tools_yield_a_derangement(self):
        derangements = [{"a": "b", "b": "c", "c": "a"}, {"a": "c", "b": "a", "c": "b"}]
        seen = set()
        for seed in range(100):
            mapping = exchange_tool_names(_tools(["a", "b", "c"]), random.Random(seed))
            assert mapping.tool_renames in derangements
            seen.add(tuple(sorted(mapping.tool_renames.items())))
        assert len(seen) == 2

    def test_ten_tools_no_fixed_point_multiset_preserved(self):
        names_ = [f"t{i}" for i in range(10)]
        for seed in range(100):
            mapping = exchange_tool_names(_tools(names_), random.Random(seed)).tool_renames
            assert sorted(mapping.values()) == sorted(names_)
            assert all(orig != new for orig, new in mapping.items())

    def test_fewer_than_two_tools_rejected(self):
        with pytest.raises(NoiseError):
            exchange_tool_names(_tools(["solo"]), random.Random(0))


class TestAddendum:
    def test_template_round_trip(self):
        tool = Tool("t", "a tool", (Parameter("p", "d", "string", True),))
        param, content = inject_addendum_param(tool, random.Random(5))
        assert param.required
        assert extract_addendum_content(param.description) == content

    def test_bounds_over_seeded_injections(self):
        tool = Tool("t", "a tool", (Parameter("p", "d", "string", True),))
        for seed in range(1000):
            param, content = inject_addendum_param(tool, random.Random(seed))
            assert 1 <= len(param.name) <= 5
            assert param.name != "p"
            assert 1 <= len(content) <= 3

    def test_zero_parameter_tool_always_injected(self):
        tool = Tool("bare", "no params", ())
        for seed in range(100):
            _, _, injected = _heavy_param_treat(tool, random.Random(seed))
            assert injected is not None

    def test_single_parameter_tool_always_injected(self):
        tool = Tool("one", "one param", (Parameter("p", "d", "string", True),))
        for seed in range(100):
            _, _, injected = _heavy_param_treat(tool, random.Random(seed))
            assert injected is not None


class TestRemapGold:
    def test_identity_mapping(self):
        gold = GoldCall("t", frozenset({"a"}), {"a": "1"})
        assert remap_gold(gold, NameMapping()) == gold

    def test_tool_rename(self):
        gold = GoldCall("predict_age", frozenset({"names"}), {"names": "x"})
        mapping = NameMapping(tool_renames={"predict_age": "predOict_aTge"})
        assert remap_gold(gold, mapping).tool_name == "predOict_aTge"

    def test_injected_param_appended(self):
        gold = GoldCall("t", frozenset({"a"}), {"a": "1"})
        mapping = NameMapping(
            param_renames={("t", "a"): "a2"},
            injected_params={"t": (Parameter("zq", "d", "string", True), "7")},
        )
        out = remap_gold(gold, mapping)
        assert out.parameters == frozenset({"a2", "zq"})
        assert out.contents == {"a2": "1", "zq": "7"}


class TestBuildEnvironment:
    def test_case_count_law(self, demo_cases):
        n = len(demo_cases)
        for level, expect in [
            (NoiseLevel.CLEAN, n),
            (NoiseLevel.SLIGHT, 2 * n),
            (NoiseLevel.MEDIUM, 2 * n),
            (NoiseLevel.HEAVY, 2 * n),
            (NoiseLevel.UNION, n),
        ]:
            assert len(build_environment(demo_cases, level, 9)) == expect

    def test_clean_is_identity(self, demo_cases):
        for pc, case in zip(build_environment(demo_cases, NoiseLevel.CLEAN, 9), demo_cases):
            assert pc.tools == case.tools
            assert pc.gold == case.gold
            assert pc.mapping.is_identity()

    def test_descriptions_never_change(self, demo_cases):
        for level in NoiseLevel:
            for pc in build_environment(demo_cases, level, 11):
                case = next(c for c in demo_cases if c.id == pc.base)
                originals = {t.name: t for t in case.tools}
                for tool in pc.tools:
                    orig = originals[pc.original_tool_name(tool.name)]
                    assert tool.description == orig.description

    def test_perturbed_names_unique(self, demo_cases):
        for level in NoiseLevel:
            for pc in build_environment(demo_cases, level, 13):
                names_ = pc.tool_names()
                assert len(set(names_)) == len(names_)
                for tool in pc.tools:
                    pnames = tool.parameter_names()
                    assert len(set(pnames)) == len(pnames)

    def test_gold_invariants_hold(self, demo_cases):
        for level in NoiseLevel:
            for pc in build_environment(demo_cases, level, 17):
                gold_tool = next(t for t in pc.tools if t.name == pc.gold.tool_name)
                assert pc.gold.parameters <= set(gold_tool.parameter_names())
                assert set(pc.gold.contents) == pc.gold.parameters
                injected = pc.mapping.injected_params.get(
                    pc.original_tool_name(pc.gold.tool_name)
                )
                if injected is not None:
                    param, content = injected
                    assert param.name in pc.gold.parameters
                    assert pc.gold.contents[param.name] == content
                    assert 1 <= len(content) <= 3

    def test_union_determinism_byte_identical(self, demo_cases):
        a = serialize_environment(build_environment(demo_cases, NoiseLevel.UNION, 99))
        b = serialize_environment(build_environment(demo_cases, NoiseLevel.UNION, 99))
        assert a == b

    def test_environment_file_round_trip(self, demo_cases):
        env = build_environment(demo_cases, NoiseLevel.HEAVY, 3)
        text = serialize_environment(env)
        assert parse_environment(text) == env
        assert serialize_environment(parse_environment(text)) == text

    def test_subseed_isolation_between_cases(self, demo_cases):
        # Dropping a case must not change the variants of the others.
        full = build_environment(demo_cases, NoiseLevel.SLIGHT, 21)
        partial = build_environment(demo_cases[1:], NoiseLevel.SLIGHT, 21)
        tail = [pc for pc in full if pc.base != demo_cases[0].id]
        assert tail == partial

    def test_empty_cases_rejected(self):
        with pytest.raises(NoiseError):
            build_environment([], NoiseLevel.CLEAN, 0)


def test_derive_subseed_is_stable():
    a = derive_subseed(1, "case", "tool_names", "slight")
    assert a == derive_subseed(1, "case", "tool_names", "slight")
    assert a != derive_subseed(2, "case", "tool_names", "slight")
    assert a != derive_subseed(1, "case", "parameter_names", "slight")
