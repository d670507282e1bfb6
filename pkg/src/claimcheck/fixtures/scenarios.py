"""Scripted model behaviour for the fixture claims and the mini-benchmark.

Each scenario is a ScriptedProvider whose answers were written against the
fixture databases; ``record`` replays them through the real agents to
produce the committed transcripts.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .. import prompts
from ..bench import BenchCase, ingest_case
from ..datasource import SourcePool, execute_sql
from ..experts import format_evidence, render_schema_question, render_sql_question
from ..models import ModelResponse, ScriptedProvider, Usage, assistant, call
from ..tools import render_result
from ..verifier import Claim, render_claim

YEARLY_COUNTS_SQL = """\
SELECT
 EXTRACT(YEAR FROM offense_date)::int
 AS year,
 offense_category,
 COUNT(*) AS incident_count
FROM public.crime_data
WHERE offense_category IN
    ('PROPERTY CRIME','VIOLENT CRIME')
 AND offense_date >= '2023-01-01'::date
 AND offense_date < '2025-01-01'::date
GROUP BY 1, 2
ORDER BY 1, 2;"""

M_SECTOR_SQL = """\
SELECT EXTRACT(YEAR FROM report_datetime)::int AS year,
       COUNT(*) AS incidents
FROM crime_data
WHERE offense_category = 'VIOLENT CRIME'
  AND sector = 'M'
  AND EXTRACT(MONTH FROM report_datetime) BETWEEN 6 AND 8
  AND EXTRACT(YEAR FROM report_datetime) IN (2024, 2025)
GROUP BY 1
ORDER BY 1;"""

LIBRARY_SQL = "SELECT COUNT(*) AS library_incidents FROM crime_data WHERE offense LIKE '%LIBRARY%';"

CITY_REPORT_CLAIM = Claim(
    "2024 saw a reduction in both property crime and violent crime in Seattle.",
    "Statement by the Seattle City Attorney in the office's 2024 annual report.",
)
M_SECTOR_CLAIM = Claim(
    "Violent crime incidents in the Seattle police M sector (the downtown core) fell 36% in "
    "June through August 2025 compared with the same months of 2024.",
)
ABSENT_CLAIM = Claim("Seattle's public libraries recorded more than one million visits in 2024.")


def _v(msg) -> ModelResponse:
    return ModelResponse(msg, Usage(1800, 350))


def _e(msg) -> ModelResponse:
    return ModelResponse(msg, Usage(900, 160))


DATA_SUMMARY = (
    "Two sources are reachable. The seattle source holds city crime records: a crime_data table of "
    "individual offenses with offense and report dates, an offense category, NIBRS group, beat, sector, "
    "precinct and neighborhood, plus a small beats lookup table mapping beats to sectors and precincts. "
    "The transit source holds regional transit ridership: a routes table and monthly_boardings by route "
    "and service month for 2023 and 2024."
)


def _data_expert(p: ScriptedProvider) -> None:
    p.add("data_expert", prompts.DATA_EXPERT_INPUT, [
        _e(assistant("", call("seattle_list_tables"), call("transit_list_tables"))),
        _e(assistant("", call("seattle_describe_table", table="crime_data"),
                     call("transit_describe_table", table="monthly_boardings"))),
        _e(assistant(DATA_SUMMARY)),
    ])


CRIME_SCHEMA_ANSWER = """\
Source `seattle`, table `crime_data` (one row per reported offense):

- `offense_date` (DATE): the date the offense occurred, stored as ISO text.
- `report_datetime` (TIMESTAMP): when the offense was reported.
- `offense_category` (TEXT, NOT NULL): the broad category; the name suggests values such as property or violent crime.
- `sector` (TEXT) and `beat` (TEXT, references `beats.beat`): police geography; I infer from the names that a sector groups several beats.
- `neighborhood` (TEXT): nullable."""


def city_report_provider() -> ScriptedProvider:
    p = ScriptedProvider()
    _data_expert(p)
    schema_q = ("Which table records individual crime incidents, and which columns hold the offense date "
                "and the offense category?", "Seattle crime data")
    p.add("schema_expert", render_schema_question(*schema_q), [
        _e(assistant("", call("seattle_describe_table", table="crime_data"))),
        _e(assistant(CRIME_SCHEMA_ANSWER)),
    ])
    sql_q = ("How many property crime and violent crime incidents occurred in 2023 and in 2024?",
             "Source seattle, table crime_data: offense_date (DATE), offense_category (TEXT).")
    p.add("sql_expert", render_sql_question(*sql_q), [
        _e(assistant("", call("seattle_sql", sql="SELECT offense_category, COUNT(*) AS n FROM crime_data "
                                                  "GROUP BY offense_category ORDER BY offense_category"))),
        _e(assistant("", call("seattle_sql", sql=YEARLY_COUNTS_SQL))),
        _e(assistant(
            "Property crime: 41 incidents in 2023 and 43 in 2024. Violent crime: 121 incidents in 2023 "
            "and 128 in 2024. Both categories rose.\n\nEvidence:\n\n" + format_evidence("seattle", YEARLY_COUNTS_SQL))),
    ])
    p.add("verifier", render_claim(CITY_REPORT_CLAIM), [
        _v(assistant("", call("data_expert"))),
        _v(assistant("", call("schema_expert", question=schema_q[0], context_hint=schema_q[1]))),
        _v(assistant("", call("sql_expert", question=sql_q[0], schema_info=sql_q[1]))),
        _v(assistant(
            "**Findings**:\n"
            "- Property crime increased from 41 (2023) to 43 (2024), a rise of 2 incidents (about 4.9%).\n"
            "- Violent crime increased from 121 (2023) to 128 (2024), a rise of 7 incidents (about 5.8%).\n\n"
            "**Conclusion**: The claim is contradicted by the data: both property crime and violent crime "
            "were higher in 2024 than in 2023 in the Seattle crime data.\n\n"
            "**Assumptions**:\n"
            "- Years are assigned by offense_date, not by report date.\n\n"
            "**Evidence**:\n\n" + format_evidence("seattle", YEARLY_COUNTS_SQL) + "\n\n"
            "**Verdict**: Inaccurate")),
    ])
    return p


def m_sector_provider() -> ScriptedProvider:
    p = ScriptedProvider()
    _data_expert(p)
    schema_q = ("Which columns identify the police sector, the report time and the offense category of an "
                "incident?", "Seattle police M sector, downtown")
    p.add("schema_expert", render_schema_question(*schema_q), [
        _e(assistant("", call("seattle_describe_table", table="crime_data"),
                     call("seattle_describe_table", table="beats"))),
        _e(assistant(CRIME_SCHEMA_ANSWER + "\n\nSource `seattle`, table `beats`: `beat` (TEXT, primary key), "
                     "`sector` (TEXT), `precinct` (TEXT).")),
    ])
    sql_q = ("How many violent crime incidents were reported in sector M during June to August of 2024 and "
             "of 2025?",
             "Source seattle, table crime_data: sector (TEXT), report_datetime (TIMESTAMP), "
             "offense_category (TEXT).")
    p.add("sql_expert", render_sql_question(*sql_q), [
        _e(assistant("", call("seattle_sql", sql="SELECT DISTINCT sector FROM crime_data ORDER BY sector"))),
        _e(assistant("", call("seattle_sql", sql=M_SECTOR_SQL))),
        _e(assistant(
            "By report date, sector M recorded 105 violent crime incidents in June to August 2024 and 67 in "
            "June to August 2025, a change of -36.19%.\n\n" + format_evidence("seattle", M_SECTOR_SQL))),
    ])
    p.add("verifier", render_claim(M_SECTOR_CLAIM), [
        _v(assistant("", call("data_expert"))),
        _v(assistant("", call("schema_expert", question=schema_q[0], context_hint=schema_q[1]))),
        _v(assistant("", call("sql_expert", question=sql_q[0], schema_info=sql_q[1]))),
        _v(assistant(
            "Findings:\n"
            "- Using report_datetime, violent crime incidents in sector M fell from 105 in June to August "
            "2024 to 67 in June to August 2025: a -36.19% change, which rounds to -36%. This matches the "
            "claim.\n\n"
            "Summary conclusion: The data supports the claim.\n\n"
            "Assumptions and notes:\n"
            "- The M sector is identified by the sector column equal to 'M'.\n"
            "- Months are assigned by report time.\n\n"
            "Evidence:\n" + format_evidence("seattle", M_SECTOR_SQL) + "\n\n"
            "Verdict: Verified")),
    ])
    return p


def absent_provider() -> ScriptedProvider:
    p = ScriptedProvider()
    _data_expert(p)
    schema_q = ("Is there any table that records library visits or attendance?", "Seattle Public Library")
    p.add("schema_expert", render_schema_question(*schema_q), [
        _e(assistant("", call("seattle_list_tables"), call("transit_list_tables"))),
        _e(assistant("Not found: neither source has a table about libraries. `seattle` has `beats` and "
                     "`crime_data`; `transit` has `routes` and `monthly_boardings`.")),
    ])
    sql_q = ("Do any crime records mention a library, as a check that library data is absent?",
             "Source seattle, table crime_data: offense (TEXT).")
    p.add("sql_expert", render_sql_question(*sql_q), [
        _e(assistant("", call("seattle_sql", sql=LIBRARY_SQL))),
        _e(assistant("No crime record mentions a library (count 0); there is no library visit data.\n\n"
                     + format_evidence("seattle", LIBRARY_SQL))),
    ])
    body = ("Findings:\n"
            "- No available source records library visits.\n"
            "- No crime record mentions a library.\n\n"
            "Conclusion: The claim cannot be supported by the available data.\n\n"
            "Evidence:\n" + format_evidence("seattle", LIBRARY_SQL))
    p.add("verifier", render_claim(ABSENT_CLAIM), [
        _v(assistant("", call("data_expert"))),
        _v(assistant("", call("schema_expert", question=schema_q[0], context_hint=schema_q[1]))),
        _v(assistant("", call("sql_expert", question=sql_q[0], schema_info=sql_q[1]))),
        _v(assistant(body)),  # no verdict line: exercises the corrective retry
    ])
    p.add("verifier", prompts.VERDICT_RETRY, [
        _v(assistant(body + "\n\nVerdict: Inaccurate")),
    ])
    return p


@dataclass(frozen=True)
class Scenario:
    name: str
    claim: Claim
    provider: Callable[[], ScriptedProvider]
    verdict: str


SCENARIOS = {
    "city_report": Scenario("city_report", CITY_REPORT_CLAIM, city_report_provider, "Inaccurate"),
    "m_sector": Scenario("m_sector", M_SECTOR_CLAIM, m_sector_provider, "Verified"),
    "absent": Scenario("absent", ABSENT_CLAIM, absent_provider, "Inaccurate"),
}


# -- mini benchmark -----------------------------------------------------------

@dataclass(frozen=True)
class ScriptedCase:
    case: BenchCase
    question: str
    sql: str
    verdict: str


def _case(cid, caption, columns, rows, claim, gold, question, sql, verdict) -> ScriptedCase:
    return ScriptedCase(BenchCase(cid, tuple(columns), tuple(tuple(r) for r in rows), claim, gold, caption),
                        question, sql, verdict)


_GROUP = ("team", "played", "won", "drawn", "lost", "points")
_GROUP_ROWS = (("brazil", "3", "2", "0", "1", "6"), ("norway", "3", "1", "2", "0", "5"),
               ("morocco", "3", "1", "1", "1", "4"), ("scotland", "3", "0", "1", "2", "1"))
_ELECTION = ("District", "Incumbent", "Party", "First elected", "Result")
_ELECTION_ROWS = (("ohio 1", "tom luken", "democratic", "1976", "re-elected"),
                  ("ohio 2", "bill gradison", "republican", "1974", "re-elected"),
                  ("ohio 3", "tony p hall", "democratic", "1978", "re-elected"),
                  ("ohio 4", "tennyson guyer", "republican", "1972", "retired republican hold"),
                  ("ohio 5", "del latta", "republican", "1958", "re-elected"))
_RACES = ("Date", "Race", "Winner", "Margin")
_RACE_ROWS = (("march 3 , 2001", "dubai cup", "captain steve", "1.5"),
              ("april 14 , 2001", "tripleprint", "sakhee", "3"),
              ("may 5 , 2001", "guineas", "galileo", "0.75"),
              ("june 9 , 2001", "derby", "galileo", "3.5"),
              ("july 28 , 2001", "king george", "galileo", "2"))
_FILMS = ("Year", "Title", "Role", "Box office (millions)")
_FILM_ROWS = (("1994", "speed", "jack traven", "350.4"), ("1999", "the matrix", "neo", "463.5"),
              ("2000", "the replacements", "shane falco", "50.1"), ("2003", "the matrix reloaded", "neo", "741.8"),
              ("2014", "john wick", "john wick", "86"))
_CITIES = ("Rank", "City", "State", "Population 2010", "Population 2020")
_CITY_ROWS = (("1", "seattle", "washington", "608,660", "737,015"),
              ("2", "spokane", "washington", "208,916", "228,989"),
              ("3", "tacoma", "washington", "198,397", "219,346"),
              ("4", "vancouver", "washington", "161,791", "190,915"),
              ("5", "bellevue", "washington", "122,363", "151,854"))

MINI_BENCH: tuple[ScriptedCase, ...] = (
    _case("t01", "1998 world cup group a", _GROUP, _GROUP_ROWS,
          "brazil won 2 of their 3 group matches", "entailed",
          "How many matches did brazil play and win?",
          "SELECT team, played_num, won_num FROM data_1998_world_cup_group_a WHERE team = 'brazil'", "Verified"),
    _case("t02", "1998 world cup group a", _GROUP, _GROUP_ROWS,
          "scotland finished with 4 points", "refuted",
          "How many points did scotland finish with?",
          "SELECT team, points_num FROM data_1998_world_cup_group_a WHERE team = 'scotland'", "Inaccurate"),
    _case("t03", "1998 world cup group a", _GROUP, _GROUP_ROWS,
          "norway was the only team in the group not to lose a match", "entailed",
          "Which teams lost no matches?",
          "SELECT team FROM data_1998_world_cup_group_a WHERE lost_num = 0", "Verified"),
    _case("t04", "1998 world cup group a", _GROUP, _GROUP_ROWS,
          "morocco and norway both drew 2 matches", "refuted",
          "How many matches did morocco and norway draw?",
          "SELECT team, drawn_num FROM data_1998_world_cup_group_a WHERE team IN ('morocco', 'norway') "
          "ORDER BY team", "Partly Inaccurate"),
    _case("t05", "united states house of representatives elections 1980 ohio", _ELECTION, _ELECTION_ROWS,
          "del latta was first elected before any other incumbent listed", "entailed",
          "Which incumbent has the earliest first elected year?",
          "SELECT incumbent, first_elected_num FROM united_states_house_of_representatives_e "
          "ORDER BY first_elected_num LIMIT 1", "Verified"),
    _case("t06", "united states house of representatives elections 1980 ohio", _ELECTION, _ELECTION_ROWS,
          "three republican incumbents were re-elected", "refuted",
          "How many republican incumbents were re-elected?",
          "SELECT COUNT(*) AS n FROM united_states_house_of_representatives_e "
          "WHERE party = 'republican' AND result = 're-elected'", "Inaccurate"),
    _case("t07", "united states house of representatives elections 1980 ohio", _ELECTION, _ELECTION_ROWS,
          "tennyson guyer retired and the seat stayed republican", "entailed",
          "What was the result for tennyson guyer's district?",
          "SELECT district, result FROM united_states_house_of_representatives_e "
          "WHERE incumbent = 'tennyson guyer'", "Verified"),
    _case("t08", "united states house of representatives elections 1980 ohio", _ELECTION, _ELECTION_ROWS,
          "tony p hall, a democrat first elected in 1976, was re-elected", "refuted",
          "What are tony p hall's party, first elected year and result?",
          "SELECT party, first_elected_num, result FROM united_states_house_of_representatives_e "
          "WHERE incumbent = 'tony p hall'", "Partly Verified"),
    _case("t09", "galileo racing record 2001", _RACES, _RACE_ROWS,
          "galileo won three races in 2001", "entailed",
          "How many races did galileo win?",
          "SELECT COUNT(*) AS wins FROM galileo_racing_record_2001 WHERE winner = 'galileo'", "Verified"),
    _case("t10", "galileo racing record 2001", _RACES, _RACE_ROWS,
          "the derby was won by the largest margin of the season", "entailed",
          "Which race had the largest winning margin?",
          "SELECT race, margin_num FROM galileo_racing_record_2001 ORDER BY margin_num DESC LIMIT 1", "Verified"),
    _case("t11", "galileo racing record 2001", _RACES, _RACE_ROWS,
          "sakhee won the guineas in may 2001", "refuted",
          "Who won the guineas and when?",
          "SELECT date_date, winner FROM galileo_racing_record_2001 WHERE race = 'guineas'", "Inaccurate"),
    _case("t12", "galileo racing record 2001", _RACES, _RACE_ROWS,
          "the king george was held after the derby", "entailed",
          "On which dates were the derby and the king george held?",
          "SELECT race, date_date FROM galileo_racing_record_2001 WHERE race IN ('derby', 'king george') "
          "ORDER BY date_date", "Verified"),
    _case("t13", "keanu reeves filmography", _FILMS, _FILM_ROWS,
          "keanu reeves played neo in two films", "entailed",
          "In how many films did he play neo?",
          "SELECT COUNT(*) AS films FROM keanu_reeves_filmography WHERE role = 'neo'", "Verified"),
    _case("t14", "keanu reeves filmography", _FILMS, _FILM_ROWS,
          "the matrix earned more at the box office than the matrix reloaded", "refuted",
          "What were the box office totals of the matrix and the matrix reloaded?",
          "SELECT title, box_office_millions_num FROM keanu_reeves_filmography "
          "WHERE title IN ('the matrix', 'the matrix reloaded') ORDER BY title", "Inaccurate"),
    _case("t15", "keanu reeves filmography", _FILMS, _FILM_ROWS,
          "john wick was released in 2014", "entailed",
          "In which year was john wick released?",
          "SELECT year_num FROM keanu_reeves_filmography WHERE title = 'john wick'", "Verified"),
    _case("t16", "keanu reeves filmography", _FILMS, _FILM_ROWS,
          "speed was released in 1994 and earned over 400 million", "refuted",
          "What are the release year and box office of speed?",
          "SELECT year_num, box_office_millions_num FROM keanu_reeves_filmography WHERE title = 'speed'",
          "Partly Verified"),
    _case("t17", "largest cities in washington", _CITIES, _CITY_ROWS,
          "seattle's population grew by more than 100,000 between 2010 and 2020", "entailed",
          "What were seattle's populations in 2010 and 2020?",
          "SELECT population_2010_num, population_2020_num FROM largest_cities_in_washington "
          "WHERE city = 'seattle'", "Verified"),
    _case("t18", "largest cities in washington", _CITIES, _CITY_ROWS,
          "tacoma had a larger 2020 population than spokane", "refuted",
          "What were the 2020 populations of tacoma and spokane?",
          "SELECT city, population_2020_num FROM largest_cities_in_washington "
          "WHERE city IN ('tacoma', 'spokane') ORDER BY city", "Inaccurate"),
    _case("t19", "largest cities in washington", _CITIES, _CITY_ROWS,
          "every listed city had more than 150,000 residents in 2020", "entailed",
          "What is the smallest 2020 population among the listed cities?",
          "SELECT MIN(population_2020_num) AS smallest FROM largest_cities_in_washington", "Verified"),
    _case("t20", "largest cities in washington", _CITIES, _CITY_ROWS,
          "bellevue ranked fourth and vancouver fifth", "refuted",
          "What are the ranks of bellevue and vancouver?",
          "SELECT city, rank_num FROM largest_cities_in_washington WHERE city IN ('bellevue', 'vancouver') "
          "ORDER BY rank_num", "Partly Inaccurate"),
)


def bench_provider(sc: ScriptedCase, work_dir: str | Path | None = None) -> ScriptedProvider:
    """Script one case; the SQL Expert's answer quotes the real query result."""
    case = sc.case
    with tempfile.TemporaryDirectory() as tmp:
        ingested = ingest_case(case, work_dir or tmp)
        pool = SourcePool(ingested.config.sources)
        try:
            result = execute_sql(pool.get(ingested.source.name), sc.sql)
        finally:
            pool.close()
    src, table = ingested.source.name, ingested.table
    schema_info = (f"Source {src}, table {table}. Column mapping:\n{ingested.note}")
    p = ScriptedProvider()
    p.add("data_expert", prompts.DATA_EXPERT_INPUT, [
        _e(assistant("", call(f"{src}_list_tables"))),
        _e(assistant("", call(f"{src}_describe_table", table="column_notes"))),
        _e(assistant(f"The {src} source holds one data table, {table}, whose text columns have typed "
                     f"siblings, and a column_notes table mapping sanitized column names to the original "
                     f"headers.")),
    ])
    p.add("sql_expert", render_sql_question(sc.question, schema_info), [
        _e(assistant("", call(f"{src}_sql", sql=sc.sql))),
        _e(assistant(f"The query returns:\n\n{render_result(result)}\n\n" + format_evidence(src, sc.sql))),
    ])
    label = sc.verdict
    conclusion = {
        "Verified": "The table supports every part of the claim.",
        "Inaccurate": "The table contradicts the claim.",
        "Partly Inaccurate": "A substantial part of the claim conflicts with the table.",
        "Partly Verified": "Part of the claim holds, but another part does not match the table.",
    }[label]
    p.add("verifier", render_claim(Claim(case.claim, case.caption)), [
        _v(assistant("", call("data_expert"))),
        _v(assistant("", call("sql_expert", question=sc.question, schema_info=schema_info))),
        _v(assistant(f"Findings:\n- {sc.question} The query returned {result.row_count} row(s): "
                     f"{'; '.join(', '.join('NULL' if v is None else str(v) for v in r) for r in result.rows)}."
                     f"\n\nConclusion: {conclusion}\n\nEvidence:\n{format_evidence(src, sc.sql)}\n\n"
                     f"Verdict: {label}")),
    ])
    return p
