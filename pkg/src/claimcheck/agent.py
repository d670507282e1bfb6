"""The bounded reason/act/observe loop, and wrapping agents as tools."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .errors import AgentIncomplete
from .models import ChatMessage, ModelProvider, ModelRequest, Sampling, Usage
from .tools import Invoker, ToolCall, ToolFailure, ToolOutcome, ToolRegistry, ToolSchema

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgentSpec:
    name: str
    instructions: str
    tools: ToolRegistry
    provider: ModelProvider
    model_id: str
    max_turns: int = 15
    output_contract: str = ""
    sampling: Sampling = Sampling()

    def __post_init__(self):
        if self.max_turns < 1:
            raise ValueError("max_turns must be at least 1")

    @property
    def system_prompt(self) -> str:
        if not self.output_contract:
            return self.instructions
        return f"{self.instructions.rstrip()}\n\n# Output contract\n{self.output_contract.strip()}"


@dataclass
class AgentRun:
    agent: str
    model_id: str
    messages: list[ChatMessage] = field(default_factory=list)
    tool_invocations: list[tuple[ToolCall, ToolOutcome]] = field(default_factory=list)
    final_text: str = ""
    usage: Usage = Usage()
    turn_count: int = 0
    complete: bool = False

    @property
    def tools_used(self) -> list[str]:
        return [c.tool for c, _ in self.tool_invocations]


def run_agent(spec: AgentSpec, input_text: str, *, allow_empty: bool = False) -> AgentRun:
    """Run ``spec`` on a fresh history until it answers or runs out of turns.

    An exhausted budget returns the partial run with ``complete=False``;
    provider failures propagate.
    """
    if not input_text.strip() and not allow_empty:
        raise ValueError(f"agent {spec.name}: input must not be empty")
    run = AgentRun(spec.name, spec.model_id,
                   [ChatMessage("system", spec.system_prompt), ChatMessage("user", input_text)])
    return _loop(spec, run)


def resume_agent(spec: AgentSpec, run: AgentRun, user_text: str) -> AgentRun:
    """Append a user turn to a finished run and continue within the same budget."""
    run.messages.append(ChatMessage("user", user_text))
    run.complete = False
    run.final_text = ""
    return _loop(spec, run)


def _loop(spec: AgentSpec, run: AgentRun) -> AgentRun:
    schemas = tuple(spec.tools.schemas())
    while run.turn_count < spec.max_turns:
        request = ModelRequest(spec.model_id, tuple(run.messages), schemas, spec.sampling, spec.name)
        response = spec.provider.complete(request)
        run.turn_count += 1
        run.usage = run.usage + response.usage
        message = response.message
        run.messages.append(message)
        if not message.tool_calls:
            run.final_text = message.content
            run.complete = True
            return run
        # sequential, in listed order, so replays see the same history
        for tool_call in message.tool_calls:
            outcome = spec.tools.invoke(tool_call)
            run.tool_invocations.append((tool_call, outcome))
            run.messages.append(ChatMessage("tool", outcome.content, tool_call_id=tool_call.id))
    log.warning("agent %s hit its turn budget of %d", spec.name, spec.max_turns)
    return run


def require_complete(run: AgentRun, spec: AgentSpec) -> AgentRun:
    if not run.complete:
        raise AgentIncomplete(spec.name, spec.max_turns)
    return run


def as_tool(spec: AgentSpec, input_schema: ToolSchema,
            render_input: Callable[[Mapping[str, Any]], str] | None = None,
            *, finish: Callable[[AgentRun], str] | None = None,
            on_run: Callable[[AgentRun], None] | None = None,
            allow_empty: bool = False) -> tuple[ToolSchema, Invoker]:
    """Expose ``spec`` as a tool; every call starts from an empty history.

    ``render_input`` turns the validated arguments into the user message,
    ``finish`` post-processes a completed run into the tool output (raising
    ToolFailure to report an error), and ``on_run`` observes each inner run.
    """
    if render_input is None:
        def render_input(args):
            return "\n\n".join(f"{k}: {v}" for k, v in args.items())

    def invoke(args: Mapping[str, Any]) -> str:
        run = run_agent(spec, render_input(args), allow_empty=allow_empty)
        if on_run is not None:
            on_run(run)
        if not run.complete:
            raise ToolFailure(f"{spec.name} failed: turn budget of {spec.max_turns} exhausted "
                              f"without a final answer")
        return finish(run) if finish is not None else run.final_text

    return input_schema, invoke
