"""Named tools with parameter schemas, and a registry that never raises on invoke."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .config import ToolboxConfig, ToolDecl
from .datasource import (DEFAULT_ROW_CAP, QueryResult, SourcePool, TableSchema, describe_table,
                         execute_sql, list_tables)
from .errors import ClaimcheckError

log = logging.getLogger(__name__)

_JSON_TYPES = {"string": str, "integer": int, "number": (int, float), "boolean": bool}


@dataclass(frozen=True)
class Param:
    name: str
    kind: str = "string"  # string | integer | number | boolean
    required: bool = True
    description: str = ""


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: tuple[Param, ...] = ()

    def __post_init__(self):
        names = [p.name for p in self.parameters]
        if len(names) != len(set(names)):
            raise ValueError(f"tool {self.name}: duplicate parameter names")

    def to_wire(self) -> dict:
        """Tool declaration in the chat-completions ``tools`` array format."""
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": {p.name: {"type": p.kind, "description": p.description}
                                   for p in self.parameters},
                    "required": [p.name for p in self.parameters if p.required],
                },
            },
        }


@dataclass(frozen=True)
class ToolCall:
    id: str
    tool: str
    arguments: Mapping[str, Any] = field(default_factory=dict)
    # raw argument text when the model emitted something that is not a JSON object
    malformed: str | None = None

    def to_dict(self) -> dict:
        d = {"id": self.id, "tool": self.tool, "arguments": dict(self.arguments)}
        if self.malformed is not None:
            d["malformed"] = self.malformed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ToolCall":
        return cls(d["id"], d["tool"], d.get("arguments") or {}, d.get("malformed"))


@dataclass(frozen=True)
class ToolOutcome:
    call_id: str
    content: str
    is_error: bool = False

    def __post_init__(self):
        if not self.content:
            object.__setattr__(self, "content", "(no output)")


class ToolFailure(ClaimcheckError):
    """Raised by invokers for failures that should be shown to the model as-is."""


Invoker = Callable[[Mapping[str, Any]], str]


class ToolRegistry:
    def __init__(self, entries: Iterable[tuple[ToolSchema, Invoker]] = ()):
        self._tools: dict[str, tuple[ToolSchema, Invoker]] = {}
        for schema, invoker in entries:
            self.register(schema, invoker)

    def register(self, schema: ToolSchema, invoker: Invoker) -> "ToolRegistry":
        if schema.name in self._tools:
            raise ValueError(f"tool already registered: {schema.name}")
        self._tools[schema.name] = (schema, invoker)
        return self

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    def names(self) -> list[str]:
        return list(self._tools)

    def schemas(self) -> list[ToolSchema]:
        return [s for s, _ in self._tools.values()]

    def schema(self, name: str) -> ToolSchema:
        return self._tools[name][0]

    def subset(self, names: Iterable[str]) -> "ToolRegistry":
        return ToolRegistry(self._tools[n] for n in names)

    def invoke(self, call: ToolCall) -> ToolOutcome:
        """Dispatch ``call``; every failure comes back as an error outcome."""
        entry = self._tools.get(call.tool)
        if entry is None:
            return ToolOutcome(call.id, f"unknown tool: {call.tool}", True)
        schema, invoker = entry
        if call.malformed is not None:
            return ToolOutcome(call.id, f"arguments for {call.tool} are not a JSON object: {call.malformed}", True)
        args, problems, extras = _check_arguments(schema, call.arguments)
        if problems:
            return ToolOutcome(call.id, f"invalid arguments for {call.tool}: " + "; ".join(problems), True)
        try:
            content = invoker(args)
            is_error = False
        except ClaimcheckError as exc:
            content, is_error = str(exc), True
        except Exception as exc:  # totality: the agent loop must always continue
            log.exception("tool %s failed", call.tool)
            content, is_error = f"{type(exc).__name__}: {exc}", True
        if extras:
            content += f"\n(ignored unexpected arguments: {', '.join(sorted(extras))})"
        return ToolOutcome(call.id, content, is_error)


def _check_arguments(schema: ToolSchema, arguments: Mapping[str, Any]):
    if not isinstance(arguments, Mapping):
        return {}, ["arguments must be an object"], []
    problems = []
    args = {}
    for p in schema.parameters:
        if p.name not in arguments or arguments[p.name] is None:
            if p.required:
                problems.append(f"missing required parameter '{p.name}'")
            continue
        value = arguments[p.name]
        expected = _JSON_TYPES.get(p.kind, object)
        if isinstance(value, bool) and p.kind != "boolean" or not isinstance(value, expected):
            problems.append(f"parameter '{p.name}' must be a {p.kind}")
            continue
        if p.required and p.kind == "string" and not value.strip():
            problems.append(f"parameter '{p.name}' must not be empty")
            continue
        args[p.name] = value
    extras = [k for k in arguments if k not in {p.name for p in schema.parameters}]
    return args, problems, extras


# -- rendering ---------------------------------------------------------------

def _cell(value) -> str:
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return "true" if value else "false"
    text = str(value)
    return text.replace("\\", "\\\\").replace("|", "\\|").replace("\r", "\\r").replace("\n", "\\n")


def render_result(result: QueryResult, row_cap: int = DEFAULT_ROW_CAP) -> str:
    """Pipe-delimited table for model consumption."""
    lines = ["| " + " | ".join(_cell(c) for c in result.columns) + " |",
             "|" + "|".join("---" for _ in result.columns) + "|"]
    for row in result.rows[:row_cap]:
        lines.append("| " + " | ".join(_cell(v) for v in row) + " |")
    if result.truncated or result.row_count > row_cap:
        lines.append(f"(truncated to {min(row_cap, result.row_count)} rows)")
    else:
        lines.append(f"({result.row_count} row{'' if result.row_count == 1 else 's'})")
    return "\n".join(lines)


def render_schema(schema: TableSchema) -> str:
    lines = [f"table {schema.table} (source {schema.source})",
             "| column | type | nullable | primary key |", "|---|---|---|---|"]
    for c in schema.columns:
        lines.append(f"| {c.name} | {c.declared_type or '(none)'} | {'yes' if c.nullable else 'no'} | "
                     f"{'yes' if c.is_primary_key else 'no'} |")
    if schema.foreign_keys:
        lines.append("foreign keys:")
        lines.extend(f"- {fk.column} -> {fk.ref_table}.{fk.ref_column}" for fk in schema.foreign_keys)
    else:
        lines.append("foreign keys: none")
    return "\n".join(lines)


# -- database tools ----------------------------------------------------------

def database_tool(decl: ToolDecl, pool: SourcePool, row_cap: int = DEFAULT_ROW_CAP) -> tuple[ToolSchema, Invoker]:
    """Schema and invoker for one configured database tool."""
    source = pool.get(decl.source)
    dialect = source.decl.kind
    if decl.kind == "execute-sql":
        schema = ToolSchema(
            decl.name,
            decl.description or (f"Run one read-only SQL query (SELECT or WITH) against source "
                                 f"'{decl.source}' ({dialect} dialect). At most {row_cap} rows are returned."),
            (Param("sql", "string", True, "a single read-only SQL statement"),),
        )

        def invoke(args):
            return render_result(execute_sql(source, args["sql"], row_cap), row_cap)
    elif decl.kind == "list-tables":
        schema = ToolSchema(
            decl.name,
            decl.description or f"List the tables in source '{decl.source}' ({dialect} dialect).",
        )

        def invoke(args):
            names = list_tables(source)
            if not names:
                return f"source {decl.source} has no tables"
            return "\n".join(names)
    elif decl.kind == "describe-table":
        schema = ToolSchema(
            decl.name,
            decl.description or (f"Describe the columns, types, keys and foreign keys of a table in source "
                                 f"'{decl.source}' ({dialect} dialect)."),
            (Param("table", "string", True, "table name"),),
        )

        def invoke(args):
            return render_schema(describe_table(source, args["table"]))
    else:  # pragma: no cover - config validation rejects other kinds
        raise ValueError(decl.kind)
    return schema, invoke


def registry_from_config(config: ToolboxConfig, pool: SourcePool,
                         names: Iterable[str] | None = None,
                         row_cap: int = DEFAULT_ROW_CAP) -> ToolRegistry:
    decls = config.tools if names is None else [config.tool(n) for n in names]
    return ToolRegistry(database_tool(d, pool, row_cap) for d in decls)


def arguments_json(call: ToolCall) -> str:
    return json.dumps(dict(call.arguments), sort_keys=True, ensure_ascii=False)
