from __future__ import annotations

from dataclasses import dataclass, replace

from .config import ToolboxConfig, ToolDecl, merge
from .datasource import SourcePool
from .experts import ExpertBundle, build_experts
from .models import ModelProvider
from .settings import Settings

_STANDARD_SUFFIXES = {"execute-sql": "sql", "list-tables": "list_tables", "describe-table": "describe_table"}


def with_standard_tools(config: ToolboxConfig) -> ToolboxConfig:
    """Add ``<source>_sql`` / ``_list_tables`` / ``_describe_table`` tools where a source lacks that kind.

    Lets a config that only declares SQL tools (schema tools are often left
    out of hand-written configs) still give the schema experts a surface.
    """
    have = {(t.source, t.kind) for t in config.tools}
    names = {t.name for t in config.tools}
    extra = []
    for s in config.sources:
        for kind, suffix in _STANDARD_SUFFIXES.items():
            name = f"{s.name}_{suffix}"
            if (s.name, kind) not in have and name not in names:
                extra.append(ToolDecl(name, kind, s.name))
    if not extra:
        return config
    return merge(config, ToolboxConfig((), tuple(extra), ()))


@dataclass
class Environment:
    """Everything a verification run needs: sources, model provider, settings."""

    config: ToolboxConfig
    pool: SourcePool
    provider: ModelProvider
    settings: Settings
    trace_ref: str = ""

    @property
    def experts(self) -> ExpertBundle:
        return build_experts(self.config, self.pool, self.provider, self.settings)

    def close(self) -> None:
        self.pool.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def build_environment(config: ToolboxConfig, provider: ModelProvider, settings: Settings | None = None,
                      *, trace_ref: str = "", standard_tools: bool = True) -> Environment:
    if settings is None:
        settings = Settings.from_mapping(config.settings)
    if standard_tools and settings.schema_toolset is None and settings.sql_toolset is None:
        config = with_standard_tools(config)
    return Environment(config, SourcePool.from_config(config), provider, settings, trace_ref)


def with_provider(env: Environment, provider: ModelProvider, trace_ref: str | None = None) -> Environment:
    return replace(env, provider=provider, trace_ref=env.trace_ref if trace_ref is None else trace_ref)
