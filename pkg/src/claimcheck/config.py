"""Toolbox configuration: database sources, the tools bound to them, and toolsets.

The YAML layout follows MCP Toolbox for Databases::

    sources:
      seattle:
        kind: postgres
        host: localhost
        database: seattle
        user: analyst
        password: ${SEATTLE_PG_PASSWORD}
    tools:
      seattle_sql:
        kind: postgres-execute-sql
        source: seattle
    toolsets:
      west-coast-sql:
        - seattle_sql

Dialect-prefixed tool kinds are normalized to ``execute-sql``,
``list-tables`` and ``describe-table``; the dialect comes from the source.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

import yaml

from .errors import ConfigError

DIALECTS = ("postgres", "mysql", "sqlite")
TOOL_KINDS = ("execute-sql", "list-tables", "describe-table")

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")
_ENV_REF = re.compile(r"^\$\{([A-Za-z_][A-Za-z0-9_]*)\}$")
_SECRET_KEYS = ("password", "secret", "token", "api_key")
_ELISION = re.compile(r"^[ \t]+\.\.\.[ \t]*(#.*)?$")

# Extra per-agent settings are allowed under this key; see ``claimcheck.settings``.
SETTINGS_KEY = "agents"


@dataclass(frozen=True)
class SourceDecl:
    name: str
    kind: str
    connection: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "connection", MappingProxyType(dict(self.connection)))

    def resolved_connection(self, environ: Mapping[str, str] | None = None) -> dict[str, str]:
        """Connection parameters with ``${VAR}`` references substituted."""
        env = os.environ if environ is None else environ
        out = {}
        for key, value in self.connection.items():
            m = _ENV_REF.match(value)
            if m:
                if m.group(1) not in env:
                    raise ConfigError(f"source {self.name}: environment variable {m.group(1)} is not set",
                                      identifier=m.group(1))
                out[key] = env[m.group(1)]
            else:
                out[key] = value
        return out


@dataclass(frozen=True)
class ToolDecl:
    name: str
    kind: str
    source: str
    description: str = ""


@dataclass(frozen=True)
class ToolsetDecl:
    name: str
    tools: tuple[str, ...] = ()


@dataclass(frozen=True)
class ToolboxConfig:
    sources: tuple[SourceDecl, ...] = ()
    tools: tuple[ToolDecl, ...] = ()
    toolsets: tuple[ToolsetDecl, ...] = ()
    settings: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def source(self, name: str) -> SourceDecl:
        for s in self.sources:
            if s.name == name:
                return s
        raise KeyError(name)

    def tool(self, name: str) -> ToolDecl:
        for t in self.tools:
            if t.name == name:
                return t
        raise KeyError(name)

    def tools_of_kind(self, kind: str) -> list[ToolDecl]:
        return [t for t in self.tools if t.kind == kind]


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.path}: {self.message}"


def normalize_kind(kind: str) -> tuple[str | None, str]:
    """Split a tool kind into (dialect prefix or None, dialect-agnostic kind)."""
    if kind in TOOL_KINDS:
        return None, kind
    for dialect in DIALECTS:
        prefix = dialect + "-"
        if kind.startswith(prefix) and kind[len(prefix):] in TOOL_KINDS:
            return dialect, kind[len(prefix):]
    raise ConfigError(f"unknown tool kind: {kind}", identifier=kind)


class _UniqueKeyLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    seen = {}
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            mark = key_node.start_mark
            raise ConfigError(f"duplicate key {key!r}", identifier=str(key),
                              line=mark.line + 1, column=mark.column + 1)
        seen[key] = True
    return yaml.SafeLoader.construct_mapping(loader, node, deep=deep)


_UniqueKeyLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _strip_elisions(text: str) -> str:
    # Indented "..." lines are illustrative elisions in hand-written fragments,
    # not YAML document markers; blank them so line numbers stay intact.
    return "\n".join("" if _ELISION.match(line) else line for line in text.split("\n"))


def _load_yaml(text: str) -> Any:
    try:
        return yaml.load(_strip_elisions(text), Loader=_UniqueKeyLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"YAML parse error: {exc.problem}",
                          line=mark.line + 1 if mark else None,
                          column=mark.column + 1 if mark else None) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML parse error: {exc}") from exc


def _mapping(value: Any, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{path} must be a mapping", identifier=path)
    return value


def parse_config(text: str) -> ToolboxConfig:
    """Parse and validate a toolbox YAML document.

    Raises ConfigError on syntax errors (with line/column), unknown kinds,
    and dangling references; warnings such as empty toolsets are allowed.
    """
    doc = _load_yaml(text)
    doc = _mapping(doc, "document")
    unknown = set(doc) - {"sources", "tools", "toolsets", SETTINGS_KEY}
    if unknown:
        raise ConfigError(f"unknown top-level key: {sorted(unknown)[0]}", identifier=sorted(unknown)[0])

    sources = []
    for name, body in _mapping(doc.get("sources"), "sources").items():
        body = _mapping(body, f"sources.{name}")
        if "kind" not in body:
            raise ConfigError(f"source {name} has no kind", identifier=str(name))
        conn = {str(k): "" if v is None else str(v) for k, v in body.items() if k != "kind"}
        sources.append(SourceDecl(str(name), str(body["kind"]), conn))

    tools = []
    for name, body in _mapping(doc.get("tools"), "tools").items():
        body = _mapping(body, f"tools.{name}")
        for key in ("kind", "source"):
            if key not in body:
                raise ConfigError(f"tool {name} has no {key}", identifier=str(name))
        prefix, kind = normalize_kind(str(body["kind"]))
        tools.append(ToolDecl(str(name), kind, str(body["source"]),
                              str(body.get("description") or "")))
        if prefix is not None:
            _check_prefix(str(name), prefix, str(body["source"]), sources)

    toolsets = []
    for name, members in _mapping(doc.get("toolsets"), "toolsets").items():
        if members is None:
            members = []
        if not isinstance(members, list):
            raise ConfigError(f"toolset {name} must be a list of tool names", identifier=str(name))
        toolsets.append(ToolsetDecl(str(name), tuple(str(m) for m in members)))

    config = ToolboxConfig(tuple(sources), tuple(tools), tuple(toolsets),
                           MappingProxyType(_mapping(doc.get(SETTINGS_KEY), SETTINGS_KEY)))
    for diag in validate(config):
        if diag.severity == "error":
            raise ConfigError(f"{diag.path}: {diag.message}", identifier=diag.path.rsplit(".", 1)[-1])
    return config


def _check_prefix(tool: str, dialect: str, source: str, sources: list[SourceDecl]) -> None:
    for s in sources:
        if s.name == source and s.kind != dialect:
            raise ConfigError(f"tool {tool}: kind prefix {dialect} does not match {s.kind} source {source}",
                              identifier=tool)


def validate(config: ToolboxConfig) -> list[Diagnostic]:
    """Check all config invariants; an empty list means the config is valid."""
    diags: list[Diagnostic] = []

    def err(path, msg):
        diags.append(Diagnostic("error", path, msg))

    seen: set[str] = set()
    for s in config.sources:
        path = f"sources.{s.name}"
        if s.name in seen:
            err(path, f"duplicate source name {s.name}")
        seen.add(s.name)
        if not _IDENT.match(s.name):
            err(path, f"invalid identifier {s.name!r}")
        if s.kind not in DIALECTS:
            err(path, f"unsupported dialect {s.kind!r} (expected one of {', '.join(DIALECTS)})")
        elif s.kind == "sqlite":
            if not s.connection.get("database") and not s.connection.get("path"):
                err(path, "sqlite source requires a file path (key 'database' or 'path')")
        else:
            for key in ("host", "database"):
                if not s.connection.get(key):
                    err(path, f"{s.kind} source requires '{key}'")
        for key, value in s.connection.items():
            if key.lower() in _SECRET_KEYS and value and not _ENV_REF.match(value):
                err(f"{path}.{key}", "secrets must be environment references like ${VAR}, not inline values")

    source_names = {s.name for s in config.sources}
    seen = set()
    for t in config.tools:
        path = f"tools.{t.name}"
        if t.name in seen:
            err(path, f"duplicate tool name {t.name}")
        seen.add(t.name)
        if not _IDENT.match(t.name):
            err(path, f"invalid identifier {t.name!r}")
        if t.kind not in TOOL_KINDS:
            err(path, f"unknown tool kind {t.kind!r}")
        if t.source not in source_names:
            err(f"{path}.{t.source}", f"tool {t.name} references undeclared source {t.source}")

    tool_names = {t.name for t in config.tools}
    seen = set()
    for ts in config.toolsets:
        path = f"toolsets.{ts.name}"
        if ts.name in seen:
            err(path, f"duplicate toolset name {ts.name}")
        seen.add(ts.name)
        if not ts.tools:
            diags.append(Diagnostic("warning", path, "toolset is empty"))
        members: set[str] = set()
        for member in ts.tools:
            if member not in tool_names:
                err(f"{path}.{member}", f"toolset {ts.name} references undeclared tool {member}")
            if member in members:
                err(f"{path}.{member}", f"tool {member} listed twice in toolset {ts.name}")
            members.add(member)
    return diags


def resolve_toolset(config: ToolboxConfig, name: str) -> list[ToolDecl]:
    """Tools of toolset ``name`` in the toolset's declared order."""
    for ts in config.toolsets:
        if ts.name == name:
            by_name = {t.name: t for t in config.tools}
            out, seen = [], set()
            for member in ts.tools:
                if member not in seen:
                    out.append(by_name[member])
                    seen.add(member)
            return out
    raise ConfigError(f"unknown toolset: {name}", identifier=name)


def to_document(config: ToolboxConfig) -> dict:
    doc: dict[str, Any] = {
        "sources": {s.name: {"kind": s.kind, **dict(s.connection)} for s in config.sources},
        "tools": {},
        "toolsets": {ts.name: list(ts.tools) for ts in config.toolsets},
    }
    for t in config.tools:
        body = {"kind": t.kind, "source": t.source}
        if t.description:
            body["description"] = t.description
        doc["tools"][t.name] = body
    if config.settings:
        doc[SETTINGS_KEY] = dict(config.settings)
    return doc


def serialize(config: ToolboxConfig) -> str:
    return yaml.safe_dump(to_document(config), sort_keys=False, default_flow_style=False)


def load_config(path) -> ToolboxConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def merge(*configs: ToolboxConfig) -> ToolboxConfig:
    """Concatenate configs (used to combine per-case fragments); revalidates."""
    merged = ToolboxConfig(
        tuple(s for c in configs for s in c.sources),
        tuple(t for c in configs for t in c.tools),
        tuple(ts for c in configs for ts in c.toolsets),
        MappingProxyType({k: v for c in configs for k, v in c.settings.items()}),
    )
    for diag in validate(merged):
        if diag.severity == "error":
            raise ConfigError(f"{diag.path}: {diag.message}")
    return merged
