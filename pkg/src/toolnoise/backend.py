"""Prompt construction and pluggable completion sources (HTTP or scripted)."""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import requests

from .catalog import Tool
from .noise import PerturbedCase

SYSTEM_TEMPLATE = """You are an expert in using tools to handle real-time queries from users.
First I will give you the task description, and your task start.
At each step, your task is to give your thought to analyze the current state, decide the next step, with a function call to actually execute your step.
After the call, you will get the call result, and you are now in a new state.
Then you will analyze your status now, then decide what to do next...
After many (Thought-call) pairs, you finally perform the task, then you can give your final answer.

Desired format:
Thought: <The thought>
Action: <The tool you decide to use>
Action Input: <The parameters for the tool>

Remember:
1. You should ALWAYS think about what to do, but all the thought is short, at most in 3 sentences.
2. The action to take should be one of the given tools below.
3. The "Action Input" needs to provide a dict similar to {{parameter_1: value_1, parameter_2: value_2}} to call action.
4. Always use the "finish" tool upon task completion. The final answer should be comprehensive enough for the user. If the task is unmanageable, use the "finish" tool and respond with "I cannot handle the task."

Task description: You should use tools to help handle the real time user queries. Specifically, you have access of the following tools:
{tool_document}

Let's Begin!"""

USER_TEMPLATE = """{query}
Begin!"""


class BackendError(RuntimeError):
    """A completion could not be obtained; carries the case id."""

    def __init__(self, case_id: str, message: str):
        self.case_id = case_id
        super().__init__(f"case {case_id!r}: {message}")


class FixtureError(BackendError):
    """The scripted fixture has no answer for the requested case."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"
    endpoint: str = ""
    model_name: str = ""
    timeout: float = 30.0
    max_retries: int = 2
    concurrency_limit: int = 4
    temperature: float = 0.0
    api_key_env: str = "TOOLNOISE_API_KEY"
    retry_backoff: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("scripted", "http"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.concurrency_limit < 1:
            raise ValueError("concurrency_limit must be >= 1")


def render_tool_document(tools: Sequence[Tool]) -> str:
    """Fixed rendering of tool docs; golden files pin this format."""
    blocks = []
    for tool in tools:
        lines = [f"Tool: {tool.name}", f"Description: {tool.description}", "Parameters:"]
        if not tool.parameters:
            lines.append("- (none)")
        for p in tool.parameters:
            req = "required" if p.required else "optional"
            line = f"- {p.name} ({p.value_type}, {req}): {p.description}"
            if p.enum_values:
                line += f" One of: {', '.join(p.enum_values)}."
            lines.append(line)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def render_action_text(thought: str, tool_name: str, arguments: Mapping[str, str]) -> str:
    args = json.dumps(
        {k: arguments[k] for k in sorted(arguments)}, ensure_ascii=False
    )
    return f"Thought: {thought}\nAction: {tool_name}\nAction Input: {args}"


def build_prompt(case: PerturbedCase) -> list[ChatMessage]:
    """System + user messages, with any prior turns appended for the
    third-turn (multi-turn) evaluation setting."""
    messages = [
        ChatMessage("system", SYSTEM_TEMPLATE.format(tool_document=render_tool_document(case.tools))),
        ChatMessage("user", USER_TEMPLATE.format(query=case.query)),
    ]
    for turn in case.prior_turns:
        messages.append(
            ChatMessage("assistant", render_action_text(turn.thought, turn.tool_name, turn.arguments))
        )
        messages.append(ChatMessage("user", f"Observation: {turn.observation}"))
    return messages


class CompletionBackend(Protocol):
    def complete(self, case_id: str, messages: Sequence[ChatMessage]) -> str: ...


@dataclass
class ScriptedBackend:
    """Deterministic fixture backend: answers keyed by case id."""

    answers: Mapping[str, str]

    def complete(self, case_id: str, messages: Sequence[ChatMessage]) -> str:
        try:
            return self.answers[case_id]
        except KeyError:
            raise FixtureError(case_id, "no scripted answer") from None


@dataclass
class HttpBackend:
    """Chat-completion HTTP backend with exponential-backoff retries."""

    config: BackendConfig
    session: requests.Session = field(default_factory=requests.Session)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, case_id: str, messages: Sequence[ChatMessage]) -> str:
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": self.config.temperature,
        }
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            try:
                resp = self.session.post(
                    self.config.endpoint,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.config.timeout,
                )
                resp.raise_for_status()
                body = resp.json()
                return body["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = str(exc)
                if attempt < self.config.max_retries:
                    time.sleep(self.config.retry_backoff * (2**attempt))
        raise BackendError(case_id, f"exhausted retries: {last_error}")


def make_backend(
    config: BackendConfig, answers: Mapping[str, str] | None = None
) -> CompletionBackend:
    if config.kind == "scripted":
        return ScriptedBackend(answers or {})
    return HttpBackend(config)


@dataclass(frozen=True)
class BatchResult:
    case_id: str
    text: str | None = None
    error: str | None = None


def run_batch(
    cases: Sequence[PerturbedCase],
    backend: CompletionBackend,
    concurrency_limit: int = 4,
) -> list[BatchResult]:
    """Complete every case with bounded concurrency, preserving input order.

    Per-case failures are recorded instead of aborting the batch.
    """

    def one(case: PerturbedCase) -> BatchResult:
        try:
            return BatchResult(case.id, text=backend.complete(case.id, build_prompt(case)))
        except Exception as exc:  # noqa: BLE001 - failures become records
            return BatchResult(case.id, error=str(exc))

    with ThreadPoolExecutor(max_workers=concurrency_limit) as pool:
        return list(pool.map(one, cases))
