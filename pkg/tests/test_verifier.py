from __future__ import annotations

import json
import sqlite3
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimcheck.config import load_config
from claimcheck.datasource import QueryResult
from claimcheck.environment import build_environment
from claimcheck.errors import AgentIncomplete, VerdictParseError
from claimcheck.experts import EvidenceQuery, format_evidence
from claimcheck.fixtures.scenarios import (CITY_REPORT_CLAIM, YEARLY_COUNTS_SQL, M_SECTOR_SQL, SCENARIOS, absent_provider,
                                           city_report_provider)
from claimcheck.models import ScriptedProvider, Usage, assistant, call
from claimcheck.settings import Settings
from claimcheck.sqlguard import normalize_whitespace
from claimcheck.verifier import (LABELS, Claim, Verdict, VerificationReport, dump_document, parse_report_markdown,
                                 parse_report_sections, parse_verdict, render_claim, render_report,
                                 validate_evidence, verify)
from oracles import crime_counts


@pytest.mark.parametrize("text, label", [
    ("Findings...\nVerdict: Partly Verified", "Partly Verified"),
    ("**Verdict**: Inaccurate", "Inaccurate"),
    ("verdict : verified", "Verified"),
    ("## Verdict: partly_inaccurate", "Partly Inaccurate"),
    ("Verdict: Verified\n...\nVerdict: Verified", "Verified"),
])
def test_parse_verdict(text, label):
    assert parse_verdict(text).value == label


@pytest.mark.parametrize("text, message", [
    ("Verdict: Mostly True", "allowed labels"),
    ("no verdict here", "allowed labels"),
    ("Verdict: Verified\nVerdict: Inaccurate", "ambiguous"),
])
def test_parse_verdict_errors(text, message):
    with pytest.raises(VerdictParseError, match=message):
        parse_verdict(text)


def test_labels_are_exactly_four():
    assert LABELS == ("Verified", "Partly Verified", "Partly Inaccurate", "Inaccurate")


def test_claim_must_not_be_empty():
    with pytest.raises(ValueError):
        Claim("   ")


def test_render_claim_includes_context():
    assert render_claim(CITY_REPORT_CLAIM).startswith("Claim to verify:\n2024 saw")
    assert "\n\nContext: Statement by" in render_claim(CITY_REPORT_CLAIM)
    assert "Context" not in render_claim(Claim("x"))


def test_sections_are_parsed_from_bold_and_plain_headings():
    text = ("**Findings**:\n- one\n- two\n\n**Conclusion**: it holds.\n\n"
            "Assumptions and notes:\n- a\n\n```evidence source=s\nSELECT 1\n```\nVerdict: Verified")
    s = parse_report_sections(text)
    assert s == {"findings": ["one", "two"], "conclusion": "it holds.", "assumptions": ["a"]}


def _run(config, scenario):
    sc = SCENARIOS[scenario]
    env = build_environment(config, sc.provider(), trace_ref=f"{scenario}.jsonl")
    try:
        return verify(sc.claim, env), env
    except Exception:
        env.close()
        raise


def test_city_report_scenario(config):
    report, env = _run(config, "city_report")
    with env:
        assert report.verdict is Verdict.INACCURATE
        assert len(report.evidence) == 1 and report.flags == []
        ev = report.evidence[0]
        assert normalize_whitespace(ev.sql) == normalize_whitespace(YEARLY_COUNTS_SQL)
        counts = {(y, c): n for y, c, n in ev.captured_result.rows}
        assert counts == crime_counts.year_category_counts(crime_counts.load())
        assert len(report.findings) == 2 and "41" in report.findings[0] and "128" in report.findings[1]
        assert report.assumptions == ["Years are assigned by offense_date, not by report date."]
        assert validate_evidence(report, env).overall


def test_usage_and_cost_are_summed_per_model(config):
    report, env = _run(config, "city_report")
    env.close()
    # verifier: 4 turns at 1800/350; experts: data 3, schema 2, sql 3 turns at 900/160
    assert report.usage_by_model == {"gpt-5": Usage(7200, 1400), "gpt-5-mini": Usage(7200, 1280)}
    assert report.usage == Usage(14400, 2680)
    expected = (Decimal(7200) * Decimal("1.25") + Decimal(1400) * Decimal("10.00")
                + Decimal(7200) * Decimal("0.25") + Decimal(1280) * Decimal("2.00")) / Decimal(10**6)
    assert report.cost_estimate == expected.quantize(Decimal("0.000001"))
    assert [r.agent for r in report.runs] == ["verifier", "data_expert", "schema_expert", "sql_expert"]


def test_m_sector_scenario(config):
    report, env = _run(config, "m_sector")
    with env:
        assert report.verdict is Verdict.VERIFIED
        assert dict(report.evidence[0].captured_result.rows) == {2024: 105, 2025: 67}
        assert round((67 - 105) / 105 * 100) == -36
        assert len(report.assumptions) == 2


def test_absent_data_scenario_uses_the_verdict_retry(config):
    report, env = _run(config, "absent")
    env.close()
    assert report.verdict is Verdict.INACCURATE
    assert report.evidence[0].captured_result.rows == ((0,),)
    assert report.verifier_run.turn_count == 5
    assert report.assumptions == []


def test_fallback_to_sql_expert_evidence(config):
    p = city_report_provider()
    from claimcheck.verifier import render_claim as rc
    p.add("verifier", rc(Claim("claim without evidence")), [
        assistant("", call("sql_expert", question="How many property crime and violent crime incidents "
                           "occurred in 2023 and in 2024?", schema_info="Source seattle, table crime_data: "
                           "offense_date (DATE), offense_category (TEXT).")),
        "Findings:\n- rose\n\nConclusion: no.\n\nVerdict: Inaccurate",
    ])
    with build_environment(config, p) as env:
        report = verify(Claim("claim without evidence"), env)
    assert report.flags == ["verifier cited no evidence; using the SQL Expert's evidence"]
    assert normalize_whitespace(report.evidence[0].sql) == normalize_whitespace(YEARLY_COUNTS_SQL)


def test_no_evidence_at_all_is_flagged(config):
    p = ScriptedProvider({("verifier", render_claim(Claim("c"))): ["Findings:\n- x\n\nVerdict: Inaccurate"]})
    with build_environment(config, p) as env:
        report = verify(Claim("c"), env)
    assert report.flags == ["no evidence queries"] and report.evidence == []
    with pytest.raises(ValueError):
        validate_evidence(report, env)


def test_unknown_evidence_source_is_flagged(config):
    text = "Findings:\n- x\n\n" + format_evidence("boise", "SELECT 1") + "\n\nVerdict: Inaccurate"
    p = ScriptedProvider({("verifier", render_claim(Claim("c"))): [text]})
    with build_environment(config, p) as env:
        report = verify(Claim("c"), env)
        assert report.flags == ["evidence 1: unknown source boise"]
        outcome = validate_evidence(report, env)
    assert not outcome.overall and outcome.checks[0].diff == "no captured result"


def test_two_evidence_queries_in_order(config):
    text = ("Findings:\n- x\n\n" + format_evidence("seattle", YEARLY_COUNTS_SQL) + "\n\n"
            + format_evidence("seattle", M_SECTOR_SQL) + "\n\nVerdict: Partly Verified")
    p = ScriptedProvider({("verifier", render_claim(Claim("c"))): [text]})
    with build_environment(config, p) as env:
        report = verify(Claim("c"), env)
        assert [e.sql for e in report.evidence] == [YEARLY_COUNTS_SQL, M_SECTOR_SQL]
        assert [c.match for c in validate_evidence(report, env).checks] == [True, True]
    md, _ = render_report(report)
    assert md.index("### Query 1") < md.index("### Query 2")


def test_verifier_budget_exhaustion(config):
    p = ScriptedProvider({("verifier", render_claim(Claim("c"))): [assistant("", call("nope"))] * 5})
    with build_environment(config, p, Settings(verifier_max_turns=3)) as env:
        with pytest.raises(AgentIncomplete):
            verify(Claim("c"), env)


def test_drift_is_detected(fresh_workspace):
    config = load_config(fresh_workspace.config)
    with build_environment(config, city_report_provider()) as env:
        report = verify(CITY_REPORT_CLAIM, env)
    with sqlite3.connect(fresh_workspace.seattle_db) as c:
        c.execute("INSERT INTO crime_data (report_number, offense_date, report_datetime, offense_category, "
                  "offense, beat) VALUES ('x', '2024-05-05', '2024-05-05 10:00:00', 'VIOLENT CRIME', "
                  "'ROBBERY', 'K1')")
    with build_environment(config, ScriptedProvider()) as env:
        outcome = validate_evidence(report, env)
    assert not outcome.overall
    assert "(2024, 'VIOLENT CRIME', 128)" in outcome.checks[0].diff
    assert "(2024, 'VIOLENT CRIME', 129)" in outcome.checks[0].diff


def test_verifier_context_holds_only_expert_answers(config):
    report, env = _run(config, "city_report")
    env.close()
    verifier_text = "\n".join(m.content for m in report.verifier_run.messages)
    # raw schema and table listings stay inside the experts
    assert "| offense_date | DATE | yes | no |" not in verifier_text
    assert "beats\ncrime_data" not in verifier_text
    schema_run = next(r for r in report.expert_runs if r.agent == "schema_expert")
    assert "| offense_date | DATE | yes | no |" in "\n".join(m.content for m in schema_run.messages)
    assert report.verifier_run.tools_used == ["data_expert", "schema_expert", "sql_expert"]


def test_render_report_sections_in_order(config):
    report, env = _run(config, "city_report")
    env.close()
    md, doc = render_report(report)
    heads = [ln for ln in md.splitlines() if ln.startswith("## ")]
    assert heads == ["## Claim", "## Findings", "## Conclusion", "## Assumptions", "## Verdict", "## Evidence",
                     "## Run details"]
    assert "Verdict: Inaccurate" in md
    assert "| 2024 | VIOLENT CRIME | 128 |" in md
    assert doc == report.to_document()
    assert parse_report_markdown(md) == doc
    assert json.loads(dump_document(doc)) == doc


def test_assumptions_heading_omitted_when_empty(config):
    report, env = _run(config, "absent")
    env.close()
    md, _ = render_report(report)
    assert "## Assumptions" not in md
    assert parse_report_markdown(md)["assumptions"] == []


def test_document_version_is_checked():
    with pytest.raises(ValueError):
        VerificationReport.from_document({"format_version": 99})


_LINE = st.text(st.characters(blacklist_categories=("Cs", "Cc", "Zl", "Zp")), min_size=1, max_size=30).map(
    str.strip).filter(bool)
_CELL = st.one_of(st.none(), st.booleans(), st.integers(-10**9, 10**9),
                  st.text(st.characters(blacklist_categories=("Cs",)), max_size=12))


@st.composite
def reports(draw):
    evidence = []
    for _ in range(draw(st.integers(0, 2))):
        ncols = draw(st.integers(1, 3))
        cols = tuple(draw(st.lists(st.from_regex(r"[a-z_][a-z0-9_]{0,6}", fullmatch=True), min_size=ncols,
                                   max_size=ncols)))
        rows = tuple(tuple(draw(st.lists(_CELL, min_size=ncols, max_size=ncols)))
                     for _ in range(draw(st.integers(0, 3))))
        captured = draw(st.one_of(st.none(), st.just(QueryResult(cols, rows, draw(st.booleans())))))
        evidence.append(EvidenceQuery(draw(st.sampled_from(["seattle", "my_db"])), "SELECT 1", captured))
    by_model = draw(st.dictionaries(st.sampled_from(["gpt-5", "gpt-5-mini"]),
                                    st.builds(Usage, st.integers(0, 10**6), st.integers(0, 10**6))))
    total = Usage()
    for u in by_model.values():
        total = total + u
    return VerificationReport(
        Claim(draw(_LINE), draw(st.one_of(st.just(""), _LINE))),
        draw(st.sampled_from(list(Verdict))),
        draw(st.lists(_LINE, max_size=3)), draw(_LINE), draw(st.lists(_LINE, max_size=2)), evidence,
        total, by_model, Decimal(draw(st.integers(0, 10**6))) / Decimal(10**6),
        draw(st.sampled_from(["", "t.jsonl"])), draw(st.lists(_LINE, max_size=2)))


@settings(max_examples=150, deadline=None)
@given(reports())
def test_report_round_trips_through_markdown_and_json(report):
    md, doc = render_report(report)
    assert parse_report_markdown(md) == doc
    assert VerificationReport.from_document(json.loads(dump_document(doc))) == report
