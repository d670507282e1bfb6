"""Show how a toolbox config grows and shrinks without code changes.

Starts from the bundled west-coast example, removes one source, adds a new
one, and prints how the toolset resolves after each edit.

    python demos/plug_and_play.py
"""

from __future__ import annotations

from claimcheck.config import (SourceDecl, ToolboxConfig, ToolDecl, ToolsetDecl, merge, parse_config,
                               resolve_toolset, serialize, validate)
from claimcheck.fixtures import TOOLBOX_EXAMPLE


def show(label: str, config: ToolboxConfig) -> None:
    names = [t.name for t in resolve_toolset(config, "west-coast-sql")]
    problems = [str(d) for d in validate(config)] or ["none"]
    print(f"{label}: west-coast-sql -> {names}; diagnostics: {'; '.join(problems)}")


def main() -> None:
    base = parse_config(TOOLBOX_EXAMPLE.read_text(encoding="utf-8"))
    show("as shipped", base)

    without_portland = ToolboxConfig(
        tuple(s for s in base.sources if s.name != "portland"),
        tuple(t for t in base.tools if t.source != "portland"),
        tuple(ToolsetDecl(ts.name, tuple(n for n in ts.tools if n != "portland_sql")) for ts in base.toolsets),
    )
    show("portland removed", without_portland)

    sf = ToolboxConfig(
        (SourceDecl("san_francisco", "postgres", {"host": "${SF_PGHOST}", "database": "sf",
                                                  "user": "${SF_PGUSER}", "password": "${SF_PGPASSWORD}"}),),
        (ToolDecl("san_francisco_sql", "execute-sql", "san_francisco"),),
        (),
    )
    grown = merge(without_portland, sf)
    members = tuple(t.name for t in resolve_toolset(grown, "west-coast-sql")) + ("san_francisco_sql",)
    grown = ToolboxConfig(grown.sources, grown.tools, (ToolsetDecl("west-coast-sql", members),), grown.settings)
    show("san francisco added", grown)
    print()
    print(serialize(grown))


if __name__ == "__main__":
    main()
