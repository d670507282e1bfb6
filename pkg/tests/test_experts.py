from __future__ import annotations

import pytest

from claimcheck import prompts
from claimcheck.config import ToolboxConfig
from claimcheck.datasource import SourcePool
from claimcheck.environment import build_environment, with_standard_tools
from claimcheck.errors import AgentIncomplete, ConfigError, EvidenceError, ReadOnlyViolation
from claimcheck.experts import (NO_DATA, ask_data_expert, ask_schema_expert, ask_sql_expert, build_experts,
                                expert_tools, extract_evidence, format_evidence, render_schema_question,
                                render_sql_question)
from claimcheck.fixtures.scenarios import DATA_SUMMARY, YEARLY_COUNTS_SQL, city_report_provider
from claimcheck.models import ScriptedProvider, assistant, call
from claimcheck.settings import Settings
from claimcheck.sqlguard import normalize_whitespace
from claimcheck.tools import ToolCall


@pytest.fixture
def env(config):
    e = build_environment(config, city_report_provider())
    yield e
    e.close()


def test_data_expert_with_no_sources():
    bundle = build_experts(ToolboxConfig(), SourcePool(()), ScriptedProvider())
    assert ask_data_expert(bundle) == NO_DATA
    assert expert_tools(bundle).invoke(ToolCall("c", "data_expert")).content == NO_DATA


def test_data_expert_names_both_sources(env):
    runs = []
    summary = ask_data_expert(env.experts, on_run=runs.append)
    assert summary == DATA_SUMMARY
    assert "seattle" in summary and "transit" in summary and "crime" in summary
    assert runs[0].tools_used == ["seattle_list_tables", "transit_list_tables",
                                  "seattle_describe_table", "transit_describe_table"]
    # tool observations were real database output
    assert runs[0].tool_invocations[0][1].content == "beats\ncrime_data"


def test_data_expert_keeps_one_paragraph(config):
    p = ScriptedProvider({("data_expert", prompts.DATA_EXPERT_INPUT): ["first para\n\nsecond para"]})
    with build_environment(config, p) as e:
        assert ask_data_expert(e.experts) == "first para [summary truncated to one paragraph]"


def test_schema_expert_answers_and_can_say_not_found(config):
    q = render_schema_question("Which table has library visits?", "Seattle Public Library")
    p = ScriptedProvider({("schema_expert", q): [assistant("", call("seattle_list_tables")),
                                                 "Not found: no table describes libraries."]})
    with build_environment(config, p) as e:
        assert ask_schema_expert(e.experts, "Which table has library visits?",
                                 "Seattle Public Library").startswith("Not found")


def test_schema_expert_rejects_empty_hint(env):
    with pytest.raises(ValueError, match="context_hint"):
        ask_schema_expert(env.experts, "Which table?", "  ")


def test_schema_experts_only_see_schema_tools(env):
    bundle = env.experts
    assert set(bundle.schema_expert.tools.names()) == {"seattle_list_tables", "seattle_describe_table",
                                                       "transit_list_tables", "transit_describe_table"}
    assert bundle.sql_expert.tools.names() == ["seattle_sql", "transit_sql"]


def test_sql_expert_evidence_is_the_executed_query(env):
    runs = []
    answer = ask_sql_expert(env.experts, "How many property crime and violent crime incidents occurred in "
                            "2023 and in 2024?", "Source seattle, table crime_data: offense_date (DATE), "
                            "offense_category (TEXT).", on_run=runs.append)
    assert len(answer.evidence) == 1
    ev = answer.evidence[0]
    assert ev.source == "seattle"
    assert normalize_whitespace(ev.sql) == normalize_whitespace(YEARLY_COUNTS_SQL)
    # it ran an exploratory query too, but cites only the decisive one
    executed = [c.arguments["sql"] for c, _ in runs[0].tool_invocations]
    assert len(executed) == 2 and executed[1] == YEARLY_COUNTS_SQL
    assert "41" in answer.answer and "128" in answer.answer


def test_sql_expert_without_evidence_fails(config):
    q = render_sql_question("How many?", "crime_data")
    p = ScriptedProvider({("sql_expert", q): ["About 40."]})
    with build_environment(config, p) as e:
        with pytest.raises(EvidenceError):
            ask_sql_expert(e.experts, "How many?", "crime_data")
        out = expert_tools(e.experts).invoke(ToolCall("c", "sql_expert",
                                                      {"question": "How many?", "schema_info": "crime_data"}))
    assert out.is_error and "[evidence check failed" in out.content


def test_sql_expert_evidence_must_name_a_known_source(config):
    q = render_sql_question("How many?", "crime_data")
    p = ScriptedProvider({("sql_expert", q): ["41.\n\n" + format_evidence("boise", "SELECT 1")]})
    with build_environment(config, p) as e:
        with pytest.raises(EvidenceError, match="boise"):
            ask_sql_expert(e.experts, "How many?", "crime_data")


def test_exhausted_expert_raises(config):
    q = render_schema_question("q", "h")
    p = ScriptedProvider({("schema_expert", q): [assistant("", call("seattle_list_tables"))] * 20})
    with build_environment(config, p, Settings(expert_max_turns=2)) as e:
        with pytest.raises(AgentIncomplete):
            ask_schema_expert(e.experts, "q", "h")


def test_toolset_bindings(config):
    s = Settings(schema_toolset="schema-tools", sql_toolset="sql-tools")
    bundle = build_experts(config, SourcePool(config.sources), ScriptedProvider(), s)
    assert bundle.sql_expert.tools.names() == ["seattle_sql", "transit_sql"]
    with pytest.raises(ConfigError):
        build_experts(config, SourcePool(config.sources), ScriptedProvider(),
                      Settings(schema_toolset="sql-tools"))


def test_standard_tools_fill_gaps():
    from claimcheck.config import parse_config
    cfg = parse_config("sources:\n  s:\n    kind: sqlite\n    database: x.db\ntools:\n  s_sql:\n"
                       "    kind: execute-sql\n    source: s\n")
    assert [t.name for t in with_standard_tools(cfg).tools] == ["s_sql", "s_list_tables", "s_describe_table"]


@pytest.mark.parametrize("text, expected", [
    ("```evidence source=seattle\nSELECT 1\n```", [("seattle", "SELECT 1")]),
    ("a\n```evidence source=\"my db\"\nSELECT 1\n```\nb\n~~~~evidence source=t\nWITH x AS (SELECT 1) SELECT * FROM x\n~~~~",
     [("my db", "SELECT 1"), ("t", "WITH x AS (SELECT 1) SELECT * FROM x")]),
    ("```sql\nSELECT 1\n```", []),
    ("````evidence source=s\nSELECT '```'\n````", [("s", "SELECT '```'")]),
])
def test_extract_evidence_examples(text, expected):
    assert [(e.source, e.sql) for e in extract_evidence(text, required=False)] == expected


@pytest.mark.parametrize("text, error", [
    ("no blocks", EvidenceError),
    ("```evidence\nSELECT 1\n```", EvidenceError),
    ("```evidence source=s\nSELECT 1\n", EvidenceError),
    ("```evidence source=s\n\n```", EvidenceError),
    ("```evidence source=s\nDELETE FROM t\n```", ReadOnlyViolation),
    ("```evidence source=s\nSELECT 1; SELECT 2\n```", ReadOnlyViolation),
])
def test_extract_evidence_errors(text, error):
    with pytest.raises(error):
        extract_evidence(text)
