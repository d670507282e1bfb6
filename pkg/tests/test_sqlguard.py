from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimcheck.sqlguard import (LexError, StatementKind, classify_statement, is_read_only,
                                 normalize_whitespace, postgres_to_sqlite, tokenize)

RO, MUT, MULTI, BAD = (StatementKind.READ_ONLY, StatementKind.MUTATING, StatementKind.MULTI_STATEMENT,
                       StatementKind.UNPARSEABLE)


@pytest.mark.parametrize("sql, kind", [
    ("WITH t AS (SELECT 1) SELECT * FROM t", RO),
    ("SELECT 1; DROP TABLE x", MULTI),
    ("UPDATE t SET a=1", MUT),
    ("SELECT 1 AS x", RO),
    ("select 1;", RO),
    ("(SELECT 1) UNION (SELECT 2)", RO),
    ("VALUES (1, 2)", RO),
    ("DELETE FROM crime_data", MUT),
    ("INSERT INTO t VALUES (1)", MUT),
    ("DROP TABLE crime_data", MUT),
    ("CREATE TABLE x (a int)", MUT),
    ("ATTACH DATABASE 'x.db' AS x", MUT),
    ("PRAGMA writable_schema = 1", MUT),
    ("SELECT * INTO backup FROM t", MUT),
    ("WITH d AS (DELETE FROM t RETURNING *) SELECT * FROM d", MUT),
    ("SELECT nextval('seq')", MUT),
    ("SELECT load_extension('evil')", MUT),
    ("SELECT * FROM t FOR UPDATE", MUT),
    ("", BAD),
    ("   -- only a comment", BAD),
    ("EXPLAIN SELECT 1", BAD),
    ("SELECT (1", BAD),
    ("SELECT 'unterminated", BAD),
])
def test_classify_examples(sql, kind):
    assert classify_statement(sql) is kind


@pytest.mark.parametrize("sql", [
    "SELECT ';' AS semi",
    "SELECT 1 -- ; DROP TABLE t",
    "SELECT 1 /* ; DELETE FROM t */",
    'SELECT "update" FROM t',
    "SELECT $$ ; drop $$ AS body",
    "SELECT E'it\\'s; fine'",
])
def test_keywords_in_literals_and_comments_are_inert(sql):
    assert classify_statement(sql) is RO


def test_tokenizer_rejects_unterminated_constructs():
    for sql in ("SELECT 'x", 'SELECT "x', "SELECT /* x", "SELECT $a$ x"):
        with pytest.raises(LexError):
            tokenize(sql)


_COLUMNS = st.sampled_from(["a", "b", "offense_category", '"Year"', "COUNT(*)", "MAX(b)", "1", "'x;y'"])
_TABLES = st.sampled_from(["t", "crime_data", "public.crime_data", "(SELECT 1 AS a) s"])
_MUTATIONS = st.sampled_from([
    "DELETE FROM t", "UPDATE t SET a = 1", "INSERT INTO t VALUES (1)", "DROP TABLE t",
    "CREATE TABLE z (a)", "ALTER TABLE t ADD COLUMN c", "PRAGMA query_only = OFF", "VACUUM",
    "ATTACH DATABASE 'z' AS z", "REPLACE INTO t VALUES (1)", "TRUNCATE t", "GRANT ALL ON t TO x",
])


@st.composite
def selects(draw):
    cols = ", ".join(draw(st.lists(_COLUMNS, min_size=1, max_size=4)))
    sql = f"SELECT {cols} FROM {draw(_TABLES)}"
    if draw(st.booleans()):
        sql += " WHERE a > 1"
    if draw(st.booleans()):
        sql = f"WITH cte AS ({sql}) SELECT * FROM cte"
    if draw(st.booleans()):
        sql += ";"
    return sql


@given(selects())
def test_generated_selects_are_read_only(sql):
    assert is_read_only(sql)


@given(selects(), _MUTATIONS, st.sampled_from([";", "; ", ";\n"]))
def test_any_appended_mutation_is_rejected(sql, mutation, sep):
    assert not is_read_only(sql.rstrip(";") + sep + mutation)


@given(_MUTATIONS)
def test_mutations_alone_are_rejected(mutation):
    assert classify_statement(mutation) is MUT


@settings(max_examples=300)
@given(st.text(max_size=80))
def test_classifier_is_total(text):
    assert classify_statement(text) in set(StatementKind)


def test_normalize_whitespace_ignores_layout_but_not_literals():
    a = "SELECT a,\n   b FROM t\nWHERE x = 'a  b'"
    b = "SELECT a, b FROM t WHERE x = 'a  b'"
    assert normalize_whitespace(a) == normalize_whitespace(b)
    assert normalize_whitespace(b) != normalize_whitespace(b.replace("'a  b'", "'a b'"))


def test_postgres_shim_translates_casts_and_extract():
    out = postgres_to_sqlite("SELECT EXTRACT(YEAR FROM offense_date)::int AS y FROM public.crime_data "
                             "WHERE offense_date >= '2023-01-01'::date AND name ILIKE 'a%'")
    assert re.search(r"strftime\('%Y',\s*offense_date\)", out)
    assert "::" not in out
    assert "public." not in out
    assert "ILIKE" not in out.upper()
    assert is_read_only(out)


def test_postgres_shim_leaves_unlexable_input_alone():
    assert postgres_to_sqlite("SELECT 'x") == "SELECT 'x"
