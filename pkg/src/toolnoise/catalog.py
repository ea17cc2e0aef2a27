"""Tool-catalog and test-case data model with canonical (byte-stable) JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

VALUE_TYPES = ("string", "integer", "number", "boolean", "enum")

# Names produced by perturbation are restricted to this charset; input
# catalogs may carry any printable ASCII.
IDENTIFIER_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_"
)


class CatalogError(ValueError):
    """Base class for catalog loading problems."""


class CatalogParseError(CatalogError):
    """Malformed catalog document; carries the path of the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class CatalogValidationError(CatalogError):
    """A parsed case violates a structural invariant."""

    def __init__(self, case_id: str, violations: Sequence["Violation"]):
        self.case_id = case_id
        self.violations = list(violations)
        detail = "; ".join(str(v) for v in violations)
        super().__init__(f"case {case_id!r}: {detail}")


@dataclass(frozen=True)
class Violation:
    """One broken invariant: which field, which rule."""

    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


@dataclass(frozen=True)
class Parameter:
    name: str
    description: str
    value_type: str
    required: bool
    enum_values: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Tool:
    name: str
    description: str
    parameters: tuple[Parameter, ...]

    def parameter_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameters)

    def get_parameter(self, name: str) -> Parameter | None:
        for p in self.parameters:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class Scenario:
    id: str
    label: str


@dataclass(frozen=True)
class GoldCall:
    tool_name: str
    parameters: frozenset[str]
    contents: Mapping[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "parameters", frozenset(self.parameters))
        object.__setattr__(self, "contents", dict(self.contents))


@dataclass(frozen=True)
class PriorTurn:
    """One past interaction: the model's call plus the observation it received."""

    thought: str
    tool_name: str
    arguments: Mapping[str, str]
    observation: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "arguments", dict(self.arguments))


@dataclass(frozen=True)
class TestCase:
    id: str
    scenario: str
    query: str
    tools: tuple[Tool, ...]
    gold: GoldCall
    prior_turns: tuple[PriorTurn, ...] = ()

    def tool_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tools)

    def get_tool(self, name: str) -> Tool | None:
        for t in self.tools:
            if t.name == name:
                return t
        return None


def validate_case(case: TestCase) -> list[Violation]:
    """Check every structural invariant; violations are data, not errors."""
    out: list[Violation] = []
    seen_tools: set[str] = set()
    for ti, tool in enumerate(case.tools):
        if not tool.name:
            out.append(Violation(f"tools[{ti}].name", "must be non-empty"))
        if tool.name in seen_tools:
            out.append(Violation(f"tools[{ti}].name", f"duplicate tool name {tool.name!r}"))
        seen_tools.add(tool.name)
        seen_params: set[str] = set()
        for pi, param in enumerate(tool.parameters):
            loc = f"tools[{ti}].parameters[{pi}]"
            if not param.name:
                out.append(Violation(f"{loc}.name", "must be non-empty"))
            if param.name in seen_params:
                out.append(Violation(f"{loc}.name", f"duplicate parameter name {param.name!r}"))
            seen_params.add(param.name)
            if param.value_type not in VALUE_TYPES:
                out.append(Violation(f"{loc}.type", f"unknown type {param.value_type!r}"))
            if param.value_type == "enum" and not param.enum_values:
                out.append(Violation(f"{loc}.enum_values", "required for enum parameters"))
            if param.value_type != "enum" and param.enum_values:
                out.append(Violation(f"{loc}.enum_values", "only allowed for enum parameters"))

    gold_tool = case.get_tool(case.gold.tool_name)
    if gold_tool is None:
        out.append(Violation("gold.tool", f"{case.gold.tool_name!r} not among case tools"))
    else:
        known = set(gold_tool.parameter_names())
        required = {p.name for p in gold_tool.parameters if p.required}
        for name in sorted(case.gold.parameters - known):
            out.append(Violation("gold.parameters", f"{name!r} not a parameter of the gold tool"))
        for name in sorted(required - case.gold.parameters):
            out.append(Violation("gold.parameters", f"missing required parameter {name!r}"))
    gold_keys = set(case.gold.contents)
    for name in sorted(case.gold.parameters - gold_keys):
        out.append(Violation("gold.contents", f"missing content for {name!r}"))
    for name in sorted(gold_keys - case.gold.parameters):
        out.append(Violation("gold.contents", f"content for {name!r} not in parameter set"))
    return out


# ---------------------------------------------------------------------------
# Canonical JSON serialization. Key order is fixed by construction and list
# entries keep input order, so equal values always serialize to equal bytes.
# ---------------------------------------------------------------------------


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def parameter_to_dict(param: Parameter) -> dict[str, Any]:
    d: dict[str, Any] = {
        "name": param.name,
        "description": param.description,
        "type": param.value_type,
        "required": param.required,
    }
    if param.enum_values is not None:
        d["enum_values"] = list(param.enum_values)
    return d


def tool_to_dict(tool: Tool) -> dict[str, Any]:
    return {
        "name": tool.name,
        "description": tool.description,
        "parameters": [parameter_to_dict(p) for p in tool.parameters],
    }


def gold_to_dict(gold: GoldCall) -> dict[str, Any]:
    return {
        "tool": gold.tool_name,
        "parameters": sorted(gold.parameters),
        "contents": {k: gold.contents[k] for k in sorted(gold.contents)},
    }


def prior_turn_to_dict(turn: PriorTurn) -> dict[str, Any]:
    return {
        "thought": turn.thought,
        "tool": turn.tool_name,
        "arguments": {k: turn.arguments[k] for k in sorted(turn.arguments)},
        "observation": turn.observation,
    }


def case_to_dict(case: TestCase) -> dict[str, Any]:
    d: dict[str, Any] = {
        "id": case.id,
        "scenario": case.scenario,
        "query": case.query,
        "tools": [tool_to_dict(t) for t in case.tools],
        "gold": gold_to_dict(case.gold),
    }
    if case.prior_turns:
        d["prior_turns"] = [prior_turn_to_dict(t) for t in case.prior_turns]
    return d


def serialize_catalog(cases: Iterable[TestCase]) -> str:
    return canonical_dumps({"cases": [case_to_dict(c) for c in cases]})


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _expect(obj: Any, kind: type, path: str) -> Any:
    if not isinstance(obj, kind):
        raise CatalogParseError(path, f"expected {kind.__name__}, got {type(obj).__name__}")
    return obj


def _get(obj: Mapping[str, Any], key: str, kind: type, path: str) -> Any:
    if key not in obj:
        raise CatalogParseError(f"{path}.{key}", "missing field")
    return _expect(obj[key], kind, f"{path}.{key}")


def parameter_from_dict(d: Mapping[str, Any], path: str) -> Parameter:
    _expect(d, dict, path)
    enum_values = None
    if "enum_values" in d:
        enum_values = tuple(
            _expect(v, str, f"{path}.enum_values[{i}]")
            for i, v in enumerate(_expect(d["enum_values"], list, f"{path}.enum_values"))
        )
    return Parameter(
        name=_get(d, "name", str, path),
        description=_get(d, "description", str, path),
        value_type=_get(d, "type", str, path),
        required=_get(d, "required", bool, path),
        enum_values=enum_values,
    )


def tool_from_dict(d: Mapping[str, Any], path: str) -> Tool:
    _expect(d, dict, path)
    params = _get(d, "parameters", list, path)
    return Tool(
        name=_get(d, "name", str, path),
        description=_get(d, "description", str, path),
        parameters=tuple(
            parameter_from_dict(p, f"{path}.parameters[{i}]") for i, p in enumerate(params)
        ),
    )


def gold_from_dict(d: Mapping[str, Any], path: str) -> GoldCall:
    _expect(d, dict, path)
    params = _get(d, "parameters", list, path)
    contents = _get(d, "contents", dict, path)
    return GoldCall(
        tool_name=_get(d, "tool", str, path),
        parameters=frozenset(_expect(p, str, f"{path}.parameters[{i}]") for i, p in enumerate(params)),
        contents={
            _expect(k, str, f"{path}.contents"): _expect(v, str, f"{path}.contents[{k!r}]")
            for k, v in contents.items()
        },
    )


def prior_turn_from_dict(d: Mapping[str, Any], path: str) -> PriorTurn:
    _expect(d, dict, path)
    args = _get(d, "arguments", dict, path)
    return PriorTurn(
        thought=_get(d, "thought", str, path),
        tool_name=_get(d, "tool", str, path),
        arguments={
            _expect(k, str, f"{path}.arguments"): _expect(v, str, f"{path}.arguments[{k!r}]")
            for k, v in args.items()
        },
        observation=_get(d, "observation", str, path),
    )


def case_from_dict(d: Mapping[str, Any], path: str) -> TestCase:
    _expect(d, dict, path)
    tools = _get(d, "tools", list, path)
    prior = ()
    if "prior_turns" in d:
        prior = tuple(
            prior_turn_from_dict(t, f"{path}.prior_turns[{i}]")
            for i, t in enumerate(_expect(d["prior_turns"], list, f"{path}.prior_turns"))
        )
    case = TestCase(
        id=_get(d, "id", str, path),
        scenario=_get(d, "scenario", str, path),
        query=_get(d, "query", str, path),
        tools=tuple(tool_from_dict(t, f"{path}.tools[{i}]") for i, t in enumerate(tools)),
        gold=gold_from_dict(_get(d, "gold", dict, path), f"{path}.gold"),
        prior_turns=prior,
    )
    violations = validate_case(case)
    if violations:
        raise CatalogValidationError(case.id, violations)
    return case


def parse_catalog(document: str | bytes) -> list[TestCase]:
    """Parse a catalog document into validated test cases, preserving order."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise CatalogParseError(f"line {exc.lineno}", exc.msg) from exc
    _expect(data, dict, "$")
    cases = _get(data, "cases", list, "$")
    return [case_from_dict(c, f"$.cases[{i}]") for i, c in enumerate(cases)]
