from __future__ import annotations

import json
import sqlite3
from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from claimcheck.bench import (ENTAILED, REFUTED, BenchCase, BenchResult, ingest_case, ingest_table,
                              load_results, map_verdict, parse_cases, parse_date, parse_number, run_bench,
                              sanitize_identifier, summarize)
from claimcheck.errors import BenchInputError
from claimcheck.fixtures import BENCH_CASES, BENCH_TRANSCRIPT_DIR, CRIME_CSV
from claimcheck.fixtures.scenarios import MINI_BENCH, bench_provider
from claimcheck.models import ReplayProvider, ScriptedProvider, Usage
from claimcheck.verifier import Verdict

CASES = [sc.case for sc in MINI_BENCH]


def replay(case):
    return ReplayProvider(BENCH_TRANSCRIPT_DIR / f"{case.id}.jsonl")


def test_map_verdict_is_pinned():
    assert {v.value: map_verdict(v) for v in Verdict} == {
        "Verified": ENTAILED, "Partly Verified": REFUTED, "Partly Inaccurate": REFUTED, "Inaccurate": REFUTED}


def test_committed_case_file_matches_the_scripts():
    from claimcheck.bench import load_cases
    assert load_cases(BENCH_CASES) == CASES
    assert sum(c.gold == ENTAILED for c in CASES) == 11


def test_case_validation():
    with pytest.raises(ValueError, match="gold"):
        BenchCase("x", ("a",), (("1",),), "c", "unknown")
    with pytest.raises(ValueError, match="cells"):
        BenchCase("x", ("a", "b"), (("1",),), "c", ENTAILED)
    with pytest.raises(ValueError, match="claim"):
        BenchCase("x", ("a",), (("1",),), " ", ENTAILED)


def test_parse_cases_reports_line_numbers():
    good = json.dumps(CASES[0].to_dict())
    with pytest.raises(BenchInputError, match="^line 2: invalid JSON"):
        parse_cases([good, "{not json"])
    with pytest.raises(BenchInputError, match="^line 1: missing field 'gold'"):
        parse_cases([json.dumps({k: v for k, v in CASES[0].to_dict().items() if k != "gold"})])
    with pytest.raises(BenchInputError, match="^line 3: duplicate case id 't01'"):
        parse_cases([good, "", good])
    assert parse_cases([good, "  "]) == [CASES[0]]


@pytest.mark.parametrize("text, value", [("12", 12), ("1,234", 1234), ("-3.50", Decimal("-3.50")),
                                         ("", None), ("n/a", None), ("1.2.3", None)])
def test_parse_number(text, value):
    assert parse_number(text) == value


@pytest.mark.parametrize("text, value", [("march 3 , 2001", "2001-03-03"), ("2024-02-29", "2024-02-29"),
                                         ("June 9, 2001", "2001-06-09"), ("not a date", None)])
def test_parse_date(text, value):
    assert parse_date(text) == value


@pytest.mark.parametrize("name, ident", [("Box office (millions)", "box_office_millions"),
                                         ("First elected", "first_elected"), ("2010", "col_2010"),
                                         ("!!!", "col"), ("Population 2020", "population_2020")])
def test_sanitize_identifier(name, ident):
    assert sanitize_identifier(name) == ident


def test_ingested_text_is_identical_to_the_input(tmp_path):
    for sc in MINI_BENCH[::4]:
        case = sc.case
        ing = ingest_case(case, tmp_path)
        cols = ", ".join(f'"{s.column}"' for s in ing.columns)
        with sqlite3.connect(ing.source.connection["database"]) as c:
            rows = c.execute(f'SELECT {cols} FROM "{ing.table}" ORDER BY rowid').fetchall()
            notes = c.execute("SELECT original_name FROM column_notes ORDER BY rowid").fetchall()
        assert tuple(rows) == case.rows
        assert [n for (n,) in notes] == list(case.columns)


def test_typed_siblings(tmp_path):
    ing = ingest_case(MINI_BENCH[8].case, tmp_path)  # galileo: dates and margins
    by_orig = {s.original: s for s in ing.columns}
    assert by_orig["Date"].typed_column == "date_date" and by_orig["Date"].typed_kind == "DATE"
    assert by_orig["Margin"].typed_column == "margin_num" and by_orig["Margin"].typed_kind == "REAL"
    assert by_orig["Race"].typed_column is None
    with sqlite3.connect(ing.source.connection["database"]) as c:
        assert c.execute(f"SELECT date_date, margin_num FROM {ing.table} WHERE race = 'derby'").fetchone() == (
            "2001-06-09", 3.5)


def test_typed_threshold_is_95_percent(tmp_path):
    rows = [[str(i)] for i in range(19)] + [["x"]]  # 19/20 = 95%
    specs, _ = ingest_table(tmp_path / "a.sqlite", "t", ["v"], rows)
    assert specs[0].typed_kind == "INTEGER"
    rows = [[str(i)] for i in range(18)] + [["x"], ["y"]]  # 90%
    specs, _ = ingest_table(tmp_path / "b.sqlite", "t", ["v"], rows)
    assert specs[0].typed_kind is None


def test_crime_csv_ingestion_keeps_group_codes_as_text(tmp_path):
    import csv
    with open(CRIME_CSV, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    specs, note = ingest_table(tmp_path / "c.sqlite", "crime_data", header, rows)
    by_name = {s.column: s for s in specs}
    assert by_name["nibrs_group_ab"].typed_column is None
    assert by_name["offense_id"].typed_column == "offense_id_num"
    assert by_name["offense_date"].typed_kind == "DATE"
    with sqlite3.connect(tmp_path / "c.sqlite") as c:
        assert c.execute("SELECT DISTINCT nibrs_group_ab FROM crime_data ORDER BY 1").fetchall() == [("A",), ("B",)]
    assert "nibrs_group_ab holds the original column 'nibrs_group_ab' as text" in note


def test_unique_column_names(tmp_path):
    specs, _ = ingest_table(tmp_path / "d.sqlite", "t", ["A b", "a-b", "a_b_num"], [["1", "2", "3"]])
    assert [s.column for s in specs] == ["a_b", "a_b_2", "a_b_num"]
    assert [s.typed_column for s in specs] == ["a_b_num_2", "a_b_2_num", "a_b_num_num"]


def test_two_cases_replayed(tmp_path):
    summary, results = run_bench(CASES[:2], replay, out_dir=tmp_path)
    assert summary.n_cases == 2 and summary.n_correct == 2 and summary.n_failed == 0
    assert results["t02"].verdict is Verdict.INACCURATE and results["t02"].predicted == REFUTED
    assert json.loads((tmp_path / "summary.json").read_text())["accuracy"] == 1.0
    assert len((tmp_path / "results.jsonl").read_text().splitlines()) == 2


def test_failures_are_recorded_and_do_not_stop_the_run(tmp_path):
    def factory(case):
        return ScriptedProvider() if case.id == "t03" else bench_provider(next(s for s in MINI_BENCH
                                                                               if s.case is case))
    summary, results = run_bench(CASES[:4], factory, out_dir=tmp_path)
    assert (summary.n_cases, summary.n_correct, summary.n_failed) == (4, 3, 1)
    assert summary.failures[0][0] == "t03" and "ScriptMiss" in summary.failures[0][1]
    assert summary.accuracy == 0.75
    assert not results["t03"].correct and results["t03"].verdict is None


def test_concurrent_run_matches_sequential(tmp_path):
    seq, seq_results = run_bench(CASES, replay, out_dir=tmp_path / "seq")
    par, par_results = run_bench(CASES, replay, parallelism=4, out_dir=tmp_path / "par")
    assert seq == par and seq_results == par_results
    assert seq.accuracy == 1.0


def test_resume_skips_finished_cases(tmp_path):
    run_bench(CASES[:5], replay, out_dir=tmp_path)
    calls = []

    def counting(case):
        calls.append(case.id)
        return replay(case)
    summary, _ = run_bench(CASES[:8], counting, out_dir=tmp_path, resume=True)
    assert calls == ["t06", "t07", "t08"]
    assert summary.n_cases == 8 and summary.n_correct == 8
    assert len(load_results(tmp_path / "results.jsonl")) == 8


def test_torn_result_lines_are_ignored(tmp_path):
    run_bench(CASES[:2], replay, out_dir=tmp_path)
    with open(tmp_path / "results.jsonl", "a") as fh:
        fh.write('{"id": "t03", "gold')
    assert set(load_results(tmp_path / "results.jsonl")) == {"t01", "t02"}


def test_costs_use_configured_prices(tmp_path):
    from claimcheck.settings import Settings
    s = Settings.from_mapping({"prices": {"gpt-5": {"input": "1.25", "output": "10"},
                                          "gpt-5-mini": {"input": "0.25", "output": "2"}}})
    summary, results = run_bench(CASES[:1], replay, s, out_dir=tmp_path)
    u = results["t01"].usage
    assert u == Usage(3 * 1800 + 5 * 900, 3 * 350 + 5 * 160)
    expected = (Decimal(5400) * Decimal("1.25") + Decimal(1050) * 10 + Decimal(4500) * Decimal("0.25")
                + Decimal(800) * 2) / Decimal(10**6)
    assert results["t01"].cost == expected.quantize(Decimal("0.000001"))
    assert summary.total_cost == results["t01"].cost


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=30))
def test_accuracy_arithmetic(outcomes):
    cases = [BenchCase(f"c{i}", ("a",), (("1",),), "claim", ENTAILED) for i in range(len(outcomes))]
    results = {c.id: BenchResult(c.id, ENTAILED, correct=ok, failure=None if ok or not failed else "boom",
                                 usage=Usage(10, 1))
               for c, (ok, failed) in zip(cases, outcomes)}
    s = summarize(cases, results)
    assert s.n_correct == sum(ok for ok, _ in outcomes)
    assert s.accuracy == pytest.approx(s.n_correct / len(cases), abs=1e-12)
    assert s.n_failed == sum(1 for ok, f in outcomes if not ok and f)
    assert s.mean_tokens == 11


def test_missing_results_count_as_failures():
    cases = [BenchCase("a", ("x",), (("1",),), "c", ENTAILED)]
    s = summarize(cases, {})
    assert s.failures == (("a", "no result"),) and s.accuracy == 0.0
