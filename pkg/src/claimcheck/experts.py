"""The Data, Schema and SQL experts, and parsing of evidence blocks.

Evidence queries travel inside fenced blocks whose info line is
``evidence source=NAME``::

    ```evidence source=seattle
    SELECT COUNT(*) FROM crime_data
    ```
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from . import prompts
from .agent import AgentRun, AgentSpec, as_tool, require_complete, run_agent
from .config import ToolboxConfig, ToolDecl, resolve_toolset
from .datasource import QueryResult, SourcePool
from .errors import ConfigError, EvidenceError, ReadOnlyViolation
from .models import ModelProvider
from .settings import Settings
from .sqlguard import StatementKind, classify_statement
from .tools import Param, ToolFailure, ToolRegistry, ToolSchema, registry_from_config

SCHEMA_KINDS = ("list-tables", "describe-table")

DATA_EXPERT_TOOL = ToolSchema(
    "data_expert",
    "Ask the Data Expert for a one-paragraph overview of every available data source. Takes no input.",
)
SCHEMA_EXPERT_TOOL = ToolSchema(
    "schema_expert",
    "Ask the Schema Expert a question about tables, columns, types and keys.",
    (Param("question", "string", True, "the schema question"),
     Param("context_hint", "string", True, "a short hint about where to look, e.g. 'Seattle, WA'")),
)
SQL_EXPERT_TOOL = ToolSchema(
    "sql_expert",
    "Ask the SQL Expert a question about the data. It runs SQL and returns an answer with evidence queries.",
    (Param("question", "string", True, "a narrowly scoped question about the data"),
     Param("schema_info", "string", True, "the relevant sources, tables and columns")),
)


@dataclass(frozen=True)
class EvidenceQuery:
    source: str
    sql: str
    captured_result: QueryResult | None = None

    def to_dict(self) -> dict:
        return {"source": self.source, "sql": self.sql,
                "result": None if self.captured_result is None else self.captured_result.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvidenceQuery":
        res = d.get("result")
        return cls(d["source"], d["sql"], None if res is None else QueryResult.from_dict(res))


_OPEN = re.compile(r"^[ \t]*(`{3,}|~{3,})[ \t]*evidence\b(.*)$")
_SOURCE_ATTR = re.compile(r"""\bsource\s*=\s*(?:"([^"]+)"|'([^']+)'|([^\s`~]+))""")


def extract_evidence(text: str, *, required: bool = True) -> list[EvidenceQuery]:
    """Parse every evidence block in ``text``, in document order.

    Raises EvidenceError for malformed blocks (or for no blocks when
    ``required``) and ReadOnlyViolation for blocks that are not a single
    read-only query.
    """
    lines = text.splitlines()
    out: list[EvidenceQuery] = []
    i = 0
    while i < len(lines):
        m = _OPEN.match(lines[i])
        if not m:
            i += 1
            continue
        fence, attrs = m.group(1), m.group(2)
        src = _SOURCE_ATTR.search(attrs)
        if src is None:
            raise EvidenceError(f"evidence block at line {i + 1} has no source=NAME tag")
        source = next(g for g in src.groups() if g)
        body = []
        j = i + 1
        close = re.compile(rf"^[ \t]*{re.escape(fence[0])}{{{len(fence)},}}[ \t]*$")
        while j < len(lines) and not close.match(lines[j]):
            body.append(lines[j])
            j += 1
        if j >= len(lines):
            raise EvidenceError(f"evidence block at line {i + 1} is not terminated")
        sql = "\n".join(body).strip()
        if not sql:
            raise EvidenceError(f"evidence block at line {i + 1} is empty")
        kind = classify_statement(sql)
        if kind is not StatementKind.READ_ONLY:
            raise ReadOnlyViolation(sql, kind.value)
        out.append(EvidenceQuery(source, sql))
        i = j + 1
    if required and not out:
        raise EvidenceError("answer contains no evidence block (expected ```evidence source=NAME)")
    return out


def format_evidence(source: str, sql: str) -> str:
    return f"```evidence source={source}\n{sql.strip()}\n```"


@dataclass(frozen=True)
class ExpertBundle:
    data_expert: AgentSpec
    schema_expert: AgentSpec
    sql_expert: AgentSpec
    sources: tuple[str, ...] = ()


def _surface(config: ToolboxConfig, toolset: str | None, kinds: Iterable[str]) -> list[ToolDecl]:
    kinds = tuple(kinds)
    if toolset is None:
        return [t for t in config.tools if t.kind in kinds]
    decls = resolve_toolset(config, toolset)
    for d in decls:
        if d.kind not in kinds:
            raise ConfigError(f"toolset {toolset} contains {d.kind} tool {d.name}; expected only {', '.join(kinds)}",
                              identifier=d.name)
    return decls


def build_experts(config: ToolboxConfig, pool: SourcePool, provider: ModelProvider,
                  settings: Settings | None = None) -> ExpertBundle:
    settings = settings or Settings()
    schema_decls = _surface(config, settings.schema_toolset, SCHEMA_KINDS)
    sql_decls = _surface(config, settings.sql_toolset, ("execute-sql",))
    schema_tools = registry_from_config(config, pool, [d.name for d in schema_decls], settings.row_cap)
    sql_tools = registry_from_config(config, pool, [d.name for d in sql_decls], settings.row_cap)

    def spec(name, instructions, contract, tools):
        return AgentSpec(name, instructions, tools, provider, settings.expert_model,
                         settings.expert_max_turns, contract, settings.sampling)

    return ExpertBundle(
        spec("data_expert", prompts.DATA_EXPERT, prompts.DATA_EXPERT_CONTRACT, schema_tools),
        spec("schema_expert", prompts.SCHEMA_EXPERT, prompts.SCHEMA_EXPERT_CONTRACT, schema_tools),
        spec("sql_expert", prompts.SQL_EXPERT, prompts.SQL_EXPERT_CONTRACT, sql_tools),
        tuple(s.name for s in config.sources),
    )


NO_DATA = "No data sources are available: the environment declares no databases."


def _one_paragraph(text: str, max_chars: int) -> str:
    paragraphs = [p.strip() for p in re.split(r"\n\s*\n", text.strip()) if p.strip()]
    summary = paragraphs[0] if paragraphs else ""
    truncated = len(paragraphs) > 1
    if len(summary) > max_chars:
        summary, truncated = summary[:max_chars].rstrip(), True
    if truncated:
        summary += " [summary truncated to one paragraph]"
    return summary


def render_schema_question(question: str, context_hint: str) -> str:
    return f"Schema question: {question.strip()}\nContext hint: {context_hint.strip()}"


def render_sql_question(question: str, schema_info: str) -> str:
    return f"Question: {question.strip()}\n\nRelevant schema information:\n{schema_info.strip()}"


def _require(**args: str) -> None:
    for name, value in args.items():
        if not value or not value.strip():
            raise ValueError(f"{name} must not be empty")


def ask_data_expert(bundle: ExpertBundle, *, max_chars: int = 2000,
                    on_run: Callable[[AgentRun], None] | None = None) -> str:
    if not bundle.sources:
        return NO_DATA
    run = run_agent(bundle.data_expert, prompts.DATA_EXPERT_INPUT)
    if on_run:
        on_run(run)
    require_complete(run, bundle.data_expert)
    return _one_paragraph(run.final_text, max_chars)


def ask_schema_expert(bundle: ExpertBundle, question: str, context_hint: str,
                      *, on_run: Callable[[AgentRun], None] | None = None) -> str:
    _require(question=question, context_hint=context_hint)
    run = run_agent(bundle.schema_expert, render_schema_question(question, context_hint))
    if on_run:
        on_run(run)
    return require_complete(run, bundle.schema_expert).final_text


@dataclass(frozen=True)
class SqlAnswer:
    answer: str
    evidence: tuple[EvidenceQuery, ...]


def check_sources(evidence: Iterable[EvidenceQuery], sources: Iterable[str]) -> None:
    known = set(sources)
    for ev in evidence:
        if ev.source not in known:
            raise EvidenceError(f"evidence names unknown source {ev.source!r}")


def ask_sql_expert(bundle: ExpertBundle, question: str, schema_info: str,
                   *, on_run: Callable[[AgentRun], None] | None = None) -> SqlAnswer:
    _require(question=question, schema_info=schema_info)
    run = run_agent(bundle.sql_expert, render_sql_question(question, schema_info))
    if on_run:
        on_run(run)
    answer = require_complete(run, bundle.sql_expert).final_text
    evidence = extract_evidence(answer)
    check_sources(evidence, bundle.sources)
    return SqlAnswer(answer, tuple(evidence))


def expert_tools(bundle: ExpertBundle, *, max_chars: int = 2000,
                 on_run: Callable[[AgentRun], None] | None = None) -> ToolRegistry:
    """The three experts as tools for a lead agent; each call gets fresh memory."""

    def data_invoke(args):
        if not bundle.sources:
            return NO_DATA
        _, inner = as_tool(bundle.data_expert, DATA_EXPERT_TOOL, lambda _a: prompts.DATA_EXPERT_INPUT,
                           finish=lambda run: _one_paragraph(run.final_text, max_chars), on_run=on_run)
        return inner(args)

    def sql_finish(run: AgentRun) -> str:
        try:
            check_sources(extract_evidence(run.final_text), bundle.sources)
        except (EvidenceError, ReadOnlyViolation) as exc:
            raise ToolFailure(f"{run.final_text}\n\n[evidence check failed: {exc}]") from exc
        return run.final_text

    return ToolRegistry([
        (DATA_EXPERT_TOOL, data_invoke),
        as_tool(bundle.schema_expert, SCHEMA_EXPERT_TOOL,
                lambda a: render_schema_question(a["question"], a["context_hint"]), on_run=on_run),
        as_tool(bundle.sql_expert, SQL_EXPERT_TOOL,
                lambda a: render_sql_question(a["question"], a["schema_info"]),
                finish=sql_finish, on_run=on_run),
    ])
