"""Name perturbations and the five environment levels, with gold-label remapping.

Noise only ever touches tool and parameter *names* (plus one injected
parameter per the heavy treatment); descriptions are never modified.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
import string
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from .catalog import (
    GoldCall,
    Parameter,
    TestCase,
    Tool,
    canonical_dumps,
    gold_from_dict,
    gold_to_dict,
    parameter_from_dict,
    parameter_to_dict,
    tool_from_dict,
    tool_to_dict,
    _expect,
    _get,
)

IDENT_CHARS = string.ascii_letters + string.digits + "_"
NONSENSE_ALPHABET = string.ascii_lowercase

TOOL_NONSENSE_MAX = 10
TOOL_NONSENSE_MIN = 3
PARAM_NONSENSE_MAX = 5
PARAM_NONSENSE_MIN = 2

ADDENDUM_TEMPLATE = (
    "A mandatory parameter. To use this tool you must set it to exactly '{content}'."
)
_ADDENDUM_RE = re.compile(r"set it to exactly '([^']{1,3})'\.$")


class NoiseError(ValueError):
    pass


class ExhaustionError(NoiseError):
    """A retry loop could not satisfy a uniqueness constraint."""


class NoiseLevel(str, Enum):
    CLEAN = "clean"
    SLIGHT = "slight"
    MEDIUM = "medium"
    HEAVY = "heavy"
    UNION = "union"


NOISY_LEVELS = (NoiseLevel.SLIGHT, NoiseLevel.MEDIUM, NoiseLevel.HEAVY)


class PerturbationTarget(str, Enum):
    TOOL_NAMES = "tool_names"
    PARAMETER_NAMES = "parameter_names"
    BOTH = "both"


@dataclass
class NameMapping:
    """Full original-to-perturbed provenance for one perturbed case."""

    tool_renames: dict[str, str] = field(default_factory=dict)
    param_renames: dict[tuple[str, str], str] = field(default_factory=dict)
    injected_params: dict[str, tuple[Parameter, str]] = field(default_factory=dict)

    def merge(self, other: "NameMapping") -> "NameMapping":
        return NameMapping(
            tool_renames={**self.tool_renames, **other.tool_renames},
            param_renames={**self.param_renames, **other.param_renames},
            injected_params={**self.injected_params, **other.injected_params},
        )

    def is_identity(self) -> bool:
        return not (self.tool_renames or self.param_renames or self.injected_params)


@dataclass(frozen=True)
class PerturbedCase:
    id: str
    base: str
    scenario: str
    query: str
    level: NoiseLevel
    target: PerturbationTarget
    seed: int
    tools: tuple[Tool, ...]
    gold: GoldCall
    mapping: NameMapping
    prior_turns: tuple = ()

    def tool_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tools)

    def original_tool_name(self, perturbed_name: str) -> str:
        for orig, new in self.mapping.tool_renames.items():
            if new == perturbed_name:
                return orig
        return perturbed_name

    def original_tool_names(self) -> set[str]:
        renamed_to = set(self.mapping.tool_renames.values())
        kept = {t.name for t in self.tools} - renamed_to
        return kept | set(self.mapping.tool_renames)


def derive_subseed(run_seed: int, case_id: str, target: str, level: str) -> int:
    """Stable per-case seed: inserting a case never reshuffles the others."""
    key = f"{run_seed}:{case_id}:{target}:{level}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


# ---------------------------------------------------------------------------
# Elementary perturbations
# ---------------------------------------------------------------------------


def slight_perturb_name(name: str, rng: random.Random) -> str:
    """Apply 1..max(1, len//3) character edits (insert/omit/substitute)."""
    if not name:
        raise NoiseError("cannot perturb an empty name")
    k_max = max(1, len(name) // 3)
    for _ in range(1000):
        k = rng.randint(1, k_max)
        positions = sorted(rng.sample(range(len(name)), k), reverse=True)
        chars = list(name)
        for pos in positions:
            op = rng.choice(("insert", "omit", "substitute"))
            if op == "insert":
                chars.insert(pos, rng.choice(IDENT_CHARS))
            elif op == "omit":
                del chars[pos]
            else:
                chars[pos] = rng.choice(IDENT_CHARS)
        result = "".join(chars)
        if result and result != name:
            return result
    raise ExhaustionError(f"could not perturb {name!r}")


def nonsense_string(
    rng: random.Random,
    max_len: int,
    existing: Iterable[str] = (),
    min_len: int | None = None,
) -> str:
    """Random lowercase string, collision-checked against ``existing``."""
    if max_len < 1:
        raise NoiseError("max_len must be >= 1")
    if min_len is None:
        min_len = min(TOOL_NONSENSE_MIN, max_len)
    min_len = min(min_len, max_len)
    taken = set(existing)
    for _ in range(1000):
        n = rng.randint(min_len, max_len)
        s = "".join(rng.choice(NONSENSE_ALPHABET) for _ in range(n))
        if s not in taken:
            return s
    raise ExhaustionError("could not draw a fresh nonsense string in 1000 tries")


def reverse_or_nonsense(
    name: str,
    rng: random.Random,
    max_len: int,
    existing: Iterable[str] = (),
    min_len: int | None = None,
) -> str:
    """Reverse the name or replace it with a nonsense string, 50/50.

    Reversal that leaves the name unchanged (palindromes) forces the
    nonsense branch; the result never equals the input.
    """
    if not name:
        raise NoiseError("cannot perturb an empty name")
    taken = set(existing) | {name}
    reversed_name = name[::-1]
    if rng.random() < 0.5 and reversed_name != name and reversed_name not in taken:
        return reversed_name
    return nonsense_string(rng, max_len, taken, min_len=min_len)


def exchange_tool_names(tools: Sequence[Tool], rng: random.Random) -> NameMapping:
    """Derange all tool names: a permutation with no fixed point."""
    if len(tools) < 2:
        raise NoiseError("exchange requires at least two tools")
    names = [t.name for t in tools]
    perm = list(names)
    for _ in range(10000):
        rng.shuffle(perm)
        if all(a != b for a, b in zip(names, perm)):
            return NameMapping(tool_renames=dict(zip(names, perm)))
    raise ExhaustionError("could not find a derangement")


def inject_addendum_param(tool: Tool, rng: random.Random) -> tuple[Parameter, str]:
    """Create the mandatory extra parameter whose description dictates its value."""
    existing = set(tool.parameter_names())
    name = nonsense_string(rng, PARAM_NONSENSE_MAX, existing, min_len=PARAM_NONSENSE_MIN)
    content = "".join(rng.choice(NONSENSE_ALPHABET) for _ in range(rng.randint(1, 3)))
    param = Parameter(
        name=name,
        description=ADDENDUM_TEMPLATE.format(content=content),
        value_type="string",
        required=True,
    )
    return param, content


def extract_addendum_content(description: str) -> str | None:
    """Recover the dictated value from an injected parameter's description."""
    m = _ADDENDUM_RE.search(description)
    return m.group(1) if m else None


def remap_gold(gold: GoldCall, mapping: NameMapping) -> GoldCall:
    """Express a gold call in perturbed names, appending injected parameters."""
    tool_name = mapping.tool_renames.get(gold.tool_name, gold.tool_name)
    params: set[str] = set()
    contents: dict[str, str] = {}
    for p in gold.parameters:
        new = mapping.param_renames.get((gold.tool_name, p), p)
        params.add(new)
        contents[new] = gold.contents[p]
    injected = mapping.injected_params.get(gold.tool_name)
    if injected is not None:
        param, value = injected
        params.add(param.name)
        contents[param.name] = value
    return GoldCall(tool_name=tool_name, parameters=frozenset(params), contents=contents)


# ---------------------------------------------------------------------------
# Per-case noise methods (tool-name side and parameter side for each level)
# ---------------------------------------------------------------------------


def _half(n: int) -> int:
    return math.ceil(n / 2)


def _rename_tools(
    case: TestCase, rng: random.Random, method: str
) -> tuple[tuple[Tool, ...], NameMapping]:
    """Rename a seeded half of the tools (slight/medium) or exchange all (heavy)."""
    tools = list(case.tools)
    taken = {t.name for t in tools}
    mapping = NameMapping()
    if method == "heavy":
        if len(tools) >= 2:
            mapping = exchange_tool_names(tools, rng)
        else:
            # A single tool cannot be deranged; fall back to a nonsense rename.
            new = nonsense_string(rng, TOOL_NONSENSE_MAX, taken)
            mapping = NameMapping(tool_renames={tools[0].name: new})
    else:
        chosen = sorted(rng.sample(range(len(tools)), _half(len(tools))))
        for idx in chosen:
            original = tools[idx].name
            for _ in range(1000):
                if method == "slight":
                    new = slight_perturb_name(original, rng)
                else:
                    new = reverse_or_nonsense(original, rng, TOOL_NONSENSE_MAX, taken)
                if new not in taken:
                    break
            else:
                raise ExhaustionError(f"no fresh rename for tool {original!r}")
            taken.add(new)
            mapping.tool_renames[original] = new
    renamed = tuple(
        Tool(mapping.tool_renames.get(t.name, t.name), t.description, t.parameters)
        for t in tools
    )
    return renamed, mapping


def _rename_params_of_tool(
    tool: Tool, rng: random.Random, method: str
) -> tuple[Tool, dict[tuple[str, str], str]]:
    """Perturb a seeded half of one tool's parameter names (slight/medium)."""
    if not tool.parameters:
        return tool, {}
    max_len = PARAM_NONSENSE_MAX
    taken = set(tool.parameter_names())
    chosen = sorted(rng.sample(range(len(tool.parameters)), _half(len(tool.parameters))))
    renames: dict[tuple[str, str], str] = {}
    new_params = list(tool.parameters)
    for idx in chosen:
        original = new_params[idx].name
        for _ in range(1000):
            if method == "slight":
                new = slight_perturb_name(original, rng)
            else:
                new = reverse_or_nonsense(
                    original, rng, max_len, taken, min_len=PARAM_NONSENSE_MIN
                )
            if new not in taken:
                break
        else:
            raise ExhaustionError(f"no fresh rename for parameter {original!r}")
        taken.add(new)
        renames[(tool.name, original)] = new
        p = new_params[idx]
        new_params[idx] = Parameter(new, p.description, p.value_type, p.required, p.enum_values)
    return Tool(tool.name, tool.description, tuple(new_params)), renames


def _heavy_param_treat(
    tool: Tool, rng: random.Random
) -> tuple[Tool, dict[tuple[str, str], str], tuple[Parameter, str] | None]:
    """Heavy parameter treatment: probable addendum injection plus name shuffle.

    Tools with fewer than two parameters are always injected; otherwise the
    injection happens with probability 1/2, and existing parameter names are
    shuffled among themselves with probability 1/2.
    """
    injected: tuple[Parameter, str] | None = None
    if len(tool.parameters) < 2 or rng.random() < 0.5:
        injected = inject_addendum_param(tool, rng)
    renames: dict[tuple[str, str], str] = {}
    new_params = list(tool.parameters)
    if len(tool.parameters) >= 2 and rng.random() < 0.5:
        names = [p.name for p in tool.parameters]
        shuffled = list(names)
        rng.shuffle(shuffled)
        for p, new in zip(tool.parameters, shuffled):
            if new != p.name:
                renames[(tool.name, p.name)] = new
        new_params = [
            Parameter(new, p.description, p.value_type, p.required, p.enum_values)
            for p, new in zip(tool.parameters, shuffled)
        ]
    if injected is not None:
        new_params.append(injected[0])
    return Tool(tool.name, tool.description, tuple(new_params)), renames, injected


def _perturb_params(
    tools: Sequence[Tool], rng: random.Random, method: str
) -> tuple[tuple[Tool, ...], NameMapping]:
    mapping = NameMapping()
    out: list[Tool] = []
    if method == "heavy":
        with_params = list(range(len(tools)))
        chosen = set(rng.sample(with_params, _half(len(tools)))) if tools else set()
        for idx, tool in enumerate(tools):
            if idx in chosen:
                new_tool, renames, injected = _heavy_param_treat(tool, rng)
                mapping.param_renames.update(renames)
                if injected is not None:
                    mapping.injected_params[tool.name] = injected
                out.append(new_tool)
            else:
                out.append(tool)
    else:
        for tool in tools:
            new_tool, renames = _rename_params_of_tool(tool, rng, method)
            mapping.param_renames.update(renames)
            out.append(new_tool)
    return tuple(out), mapping


def _make_variant(
    case: TestCase,
    level: NoiseLevel,
    target: PerturbationTarget,
    run_seed: int,
    tool_method: str | None,
    param_method: str | None,
) -> PerturbedCase:
    subseed = derive_subseed(run_seed, case.id, target.value, level.value)
    rng = random.Random(subseed)
    tools: tuple[Tool, ...] = case.tools
    mapping = NameMapping()
    if tool_method is not None:
        tools, tool_map = _rename_tools(case, rng, tool_method)
        mapping = mapping.merge(tool_map)
    if param_method is not None:
        # Parameter renames are re-keyed by original tool names below.
        tools, param_map = _perturb_params(tools, rng, param_method)
        rekeyed = NameMapping(
            param_renames={
                (case_tool_original(mapping, t), p): v
                for (t, p), v in param_map.param_renames.items()
            },
            injected_params={
                case_tool_original(mapping, t): v
                for t, v in param_map.injected_params.items()
            },
        )
        mapping = mapping.merge(rekeyed)
    gold = remap_gold(case.gold, mapping)
    suffix = {"tool_names": "tool", "parameter_names": "param", "both": "both"}[target.value]
    return PerturbedCase(
        id=f"{case.id}__{level.value}_{suffix}",
        base=case.id,
        scenario=case.scenario,
        query=case.query,
        level=level,
        target=target,
        seed=subseed,
        tools=tools,
        gold=gold,
        mapping=mapping,
        prior_turns=case.prior_turns,
    )


def case_tool_original(mapping: NameMapping, current_name: str) -> str:
    """Map a (possibly already renamed) tool name back to its original."""
    for orig, new in mapping.tool_renames.items():
        if new == current_name:
            return orig
    return current_name


def build_environment(
    cases: Sequence[TestCase], level: NoiseLevel, seed: int
) -> list[PerturbedCase]:
    """Build one environment level: noise-injected variants for every case.

    Slight/Medium/Heavy produce a tool-noise and a parameter-noise variant
    per case (2N total); Clean and Union produce one variant per case.
    """
    if not cases:
        raise NoiseError("cases must be non-empty")
    out: list[PerturbedCase] = []
    for case in cases:
        if level is NoiseLevel.CLEAN:
            out.append(
                PerturbedCase(
                    id=f"{case.id}__clean",
                    base=case.id,
                    scenario=case.scenario,
                    query=case.query,
                    level=level,
                    target=PerturbationTarget.BOTH,
                    seed=derive_subseed(seed, case.id, "both", level.value),
                    tools=case.tools,
                    gold=case.gold,
                    mapping=NameMapping(),
                    prior_turns=case.prior_turns,
                )
            )
        elif level is NoiseLevel.UNION:
            pick_rng = random.Random(
                derive_subseed(seed, case.id, "method_choice", level.value)
            )
            tool_method = pick_rng.choice(("slight", "medium", "heavy"))
            param_method = pick_rng.choice(("slight", "medium", "heavy"))
            out.append(
                _make_variant(
                    case, level, PerturbationTarget.BOTH, seed, tool_method, param_method
                )
            )
        else:
            method = level.value
            out.append(
                _make_variant(case, level, PerturbationTarget.TOOL_NAMES, seed, method, None)
            )
            out.append(
                _make_variant(
                    case, level, PerturbationTarget.PARAMETER_NAMES, seed, None, method
                )
            )
    return out


# ---------------------------------------------------------------------------
# Environment-file serialization (catalog format plus provenance fields)
# ---------------------------------------------------------------------------


def mapping_to_dict(mapping: NameMapping) -> dict[str, Any]:
    param_renames: dict[str, dict[str, str]] = {}
    for (tool, param), new in sorted(mapping.param_renames.items()):
        param_renames.setdefault(tool, {})[param] = new
    return {
        "tool_renames": {k: mapping.tool_renames[k] for k in sorted(mapping.tool_renames)},
        "param_renames": param_renames,
        "injected_params": {
            tool: {
                "parameter": parameter_to_dict(param),
                "gold_content": content,
            }
            for tool, (param, content) in sorted(mapping.injected_params.items())
        },
    }


def mapping_from_dict(d: Mapping[str, Any], path: str) -> NameMapping:
    _expect(d, dict, path)
    param_renames: dict[tuple[str, str], str] = {}
    for tool, renames in _get(d, "param_renames", dict, path).items():
        for param, new in _expect(renames, dict, f"{path}.param_renames[{tool!r}]").items():
            param_renames[(tool, param)] = new
    injected: dict[str, tuple[Parameter, str]] = {}
    for tool, entry in _get(d, "injected_params", dict, path).items():
        epath = f"{path}.injected_params[{tool!r}]"
        _expect(entry, dict, epath)
        injected[tool] = (
            parameter_from_dict(_get(entry, "parameter", dict, epath), f"{epath}.parameter"),
            _get(entry, "gold_content", str, epath),
        )
    return NameMapping(
        tool_renames=dict(_get(d, "tool_renames", dict, path)),
        param_renames=param_renames,
        injected_params=injected,
    )


def perturbed_to_dict(pc: PerturbedCase) -> dict[str, Any]:
    from .catalog import prior_turn_to_dict

    d: dict[str, Any] = {
        "id": pc.id,
        "base": pc.base,
        "scenario": pc.scenario,
        "query": pc.query,
        "level": pc.level.value,
        "target": pc.target.value,
        "seed": pc.seed,
        "tools": [tool_to_dict(t) for t in pc.tools],
        "gold": gold_to_dict(pc.gold),
        "mapping": mapping_to_dict(pc.mapping),
    }
    if pc.prior_turns:
        d["prior_turns"] = [prior_turn_to_dict(t) for t in pc.prior_turns]
    return d


def perturbed_from_dict(d: Mapping[str, Any], path: str = "$") -> PerturbedCase:
    from .catalog import prior_turn_from_dict

    _expect(d, dict, path)
    prior = ()
    if "prior_turns" in d:
        prior = tuple(
            prior_turn_from_dict(t, f"{path}.prior_turns[{i}]")
            for i, t in enumerate(_expect(d["prior_turns"], list, f"{path}.prior_turns"))
        )
    tools = _get(d, "tools", list, path)
    return PerturbedCase(
        id=_get(d, "id", str, path),
        base=_get(d, "base", str, path),
        scenario=_get(d, "scenario", str, path),
        query=_get(d, "query", str, path),
        level=NoiseLevel(_get(d, "level", str, path)),
        target=PerturbationTarget(_get(d, "target", str, path)),
        seed=_get(d, "seed", int, path),
        tools=tuple(tool_from_dict(t, f"{path}.tools[{i}]") for i, t in enumerate(tools)),
        gold=gold_from_dict(_get(d, "gold", dict, path), f"{path}.gold"),
        mapping=mapping_from_dict(_get(d, "mapping", dict, path), f"{path}.mapping"),
        prior_turns=prior,
    )


def serialize_environment(cases: Iterable[PerturbedCase]) -> str:
    return canonical_dumps({"cases": [perturbed_to_dict(c) for c in cases]})


def parse_environment(document: str | bytes) -> list[PerturbedCase]:
    import json

    if isinstance(document, bytes):
        document = document.decode("utf-8")
    data = json.loads(document)
    _expect(data, dict, "$")
    return [
        perturbed_from_dict(c, f"$.cases[{i}]")
        for i, c in enumerate(_get(data, "cases", list, "$"))
    ]
