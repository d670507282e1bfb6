from __future__ import annotations

import hashlib
import os
import sqlite3

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from claimcheck.config import SourceDecl
from claimcheck.datasource import (QueryResult, SourceHandle, SourcePool, canonical_rows, decode_value,
                                   describe_table, execute_sql, list_tables)
from claimcheck.errors import DataSourceError, ReadOnlyViolation, UnknownTableError
from claimcheck.fixtures.scenarios import YEARLY_COUNTS_SQL, M_SECTOR_SQL
from oracles import crime_counts


def _handle(path) -> SourceHandle:
    return SourceHandle(SourceDecl("s", "sqlite", {"database": str(path)}))


def _sha(path) -> str:
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def test_yearly_counts_query_matches_oracle(pool):
    result = execute_sql(pool.get("seattle"), YEARLY_COUNTS_SQL)
    assert result.columns == ("year", "offense_category", "incident_count")
    expected = crime_counts.year_category_counts(crime_counts.load())
    assert {(y, c): n for y, c, n in result.rows} == expected
    assert expected == {(2023, "PROPERTY CRIME"): 41, (2023, "VIOLENT CRIME"): 121,
                        (2024, "PROPERTY CRIME"): 43, (2024, "VIOLENT CRIME"): 128}
    assert not result.truncated


def test_summer_sector_query_matches_oracle(pool):
    rows = execute_sql(pool.get("seattle"), M_SECTOR_SQL).rows
    assert dict(rows) == crime_counts.summer_sector_counts(crime_counts.load()) == {2024: 105, 2025: 67}


def test_select_one(pool):
    r = execute_sql(pool.get("seattle"), "SELECT 1")
    assert r.rows == ((1,),) and r.row_count == 1


def test_mutations_never_reach_the_database(fresh_workspace):
    before = _sha(fresh_workspace.seattle_db)
    with _handle(fresh_workspace.seattle_db) as h:
        for sql in ("DELETE FROM crime_data", "SELECT 1; DROP TABLE crime_data",
                    "UPDATE crime_data SET sector = 'Z'", "INSERT INTO beats VALUES ('Z1','Z','Z')"):
            with pytest.raises(ReadOnlyViolation):
                execute_sql(h, sql)
        assert execute_sql(h, "SELECT COUNT(*) FROM crime_data").rows == ((487,),)
    assert _sha(fresh_workspace.seattle_db) == before


def test_sqlite_connection_is_read_only_below_the_classifier(fresh_workspace):
    # even if classification were bypassed, the connection refuses writes
    h = _handle(fresh_workspace.seattle_db)
    conn = h._connection()
    with pytest.raises(sqlite3.DatabaseError):
        conn.execute("DELETE FROM crime_data")
    h.close()


def test_backend_errors_carry_dialect_and_verbatim_text(pool):
    with pytest.raises(DataSourceError) as exc:
        execute_sql(pool.get("seattle"), "SELECT no_such_column FROM crime_data")
    assert exc.value.dialect == "sqlite"
    assert "no_such_column" in exc.value.detail


def test_list_tables_single_and_empty(tmp_path):
    one = tmp_path / "one.sqlite"
    with sqlite3.connect(one) as c:
        c.execute("CREATE TABLE crime_data (a INTEGER)")
    with _handle(one) as h:
        assert list_tables(h) == ["crime_data"]
    empty = tmp_path / "empty.sqlite"
    sqlite3.connect(empty).close()
    with _handle(empty) as h:
        assert list_tables(h) == []


def test_fixture_tables(pool):
    assert list_tables(pool.get("seattle")) == ["beats", "crime_data"]


def test_missing_database_file_is_an_error(tmp_path):
    with pytest.raises(DataSourceError):
        list_tables(_handle(tmp_path / "absent.sqlite"))
    assert not (tmp_path / "absent.sqlite").exists()


def test_closed_handle_is_an_error(workspace):
    h = _handle(workspace.seattle_db)
    execute_sql(h, "SELECT 1")
    h.close()
    with pytest.raises(DataSourceError, match="closed"):
        execute_sql(h, "SELECT 1")


def test_describe_crime_data(pool):
    schema = describe_table(pool.get("seattle"), "crime_data")
    assert [c.name for c in schema.columns][:4] == ["offense_id", "report_number", "offense_date",
                                                   "report_datetime"]
    od = schema.column("offense_date")
    assert od.declared_type == "DATE" and od.nullable and not od.is_primary_key
    assert schema.column("offense_id").is_primary_key
    assert [(f.column, f.ref_table, f.ref_column) for f in schema.foreign_keys] == [("beat", "beats", "beat")]


def test_describe_table_without_foreign_keys(pool):
    assert describe_table(pool.get("seattle"), "beats").foreign_keys == ()


def test_describe_unknown_table(pool):
    with pytest.raises(UnknownTableError) as exc:
        describe_table(pool.get("seattle"), "nope")
    assert exc.value.table == "nope"


def test_pool_is_lazy_and_rejects_unknown_sources(config):
    p = SourcePool.from_config(config)
    assert p.names == ["seattle", "transit"]
    assert p._handles == {}
    assert p.get("seattle") is p.get("seattle")
    with pytest.raises(KeyError):
        p.get("boise")
    p.close()


def test_decode_value_is_exact():
    import datetime
    import decimal
    assert decode_value(0.1) == "0.1"
    assert decode_value(decimal.Decimal("12.50")) == "12.50"
    assert decode_value(datetime.date(2024, 1, 2)) == "2024-01-02"
    assert decode_value(b"\x01\xff") == "\\x01ff"
    assert decode_value(True) is True


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(n=st.integers(0, 120), cap=st.integers(1, 60))
def test_truncation_flag(tmp_path_factory, n, cap):
    path = tmp_path_factory.mktemp("trunc") / "t.sqlite"
    with sqlite3.connect(path) as c:
        c.execute("CREATE TABLE t (i INTEGER)")
        c.executemany("INSERT INTO t VALUES (?)", [(i,) for i in range(n)])
    with _handle(path) as h:
        r = execute_sql(h, "SELECT i FROM t ORDER BY i", row_cap=cap)
    assert r.row_count == min(n, cap)
    assert r.truncated == (n > cap)
    assert [x for (x,) in r.rows] == list(range(min(n, cap)))


def test_row_cap_must_be_positive(pool):
    with pytest.raises(ValueError):
        execute_sql(pool.get("seattle"), "SELECT 1", row_cap=0)


_SCALARS = st.one_of(st.none(), st.booleans(), st.integers(-10**6, 10**6), st.text(max_size=6))


@given(st.lists(st.tuples(_SCALARS, _SCALARS), max_size=8), st.randoms())
def test_canonical_rows_ignore_order(rows, rnd):
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    assert canonical_rows(rows) == canonical_rows(shuffled)


def test_query_result_round_trips_through_dict(pool):
    r = execute_sql(pool.get("seattle"), YEARLY_COUNTS_SQL)
    assert QueryResult.from_dict(r.to_dict()) == r


@pytest.mark.skipif(not os.environ.get("CLAIMCHECK_PG_DSN"), reason="set CLAIMCHECK_PG_DSN to a loaded Postgres")
def test_postgres_and_sqlite_agree(pool):  # pragma: no cover - needs a server
    import urllib.parse
    dsn = urllib.parse.urlparse(os.environ["CLAIMCHECK_PG_DSN"])
    decl = SourceDecl("pg", "postgres", {"host": dsn.hostname, "port": str(dsn.port or 5432),
                                         "database": dsn.path.lstrip("/"), "user": dsn.username or "",
                                         "password": dsn.password or ""})
    with SourceHandle(decl) as h:
        assert execute_sql(h, YEARLY_COUNTS_SQL).rows == execute_sql(pool.get("seattle"), YEARLY_COUNTS_SQL).rows
