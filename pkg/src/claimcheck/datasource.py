"""Read-only query execution and schema introspection across SQL backends.

SQLite is built in.  Postgres and MySQL use ``psycopg`` and ``pymysql``
respectively, imported on first connection (install the ``postgres`` /
``mysql`` extras).  Every backend opens its session in read-only mode; the
statement classifier in :mod:`claimcheck.sqlguard` runs first regardless.
"""

from __future__ import annotations

import datetime as _dt
import decimal
import logging
import sqlite3
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

from .config import SourceDecl, ToolboxConfig
from .errors import DataSourceError, ReadOnlyViolation, UnknownTableError
from .sqlguard import StatementKind, classify_statement, postgres_to_sqlite

log = logging.getLogger(__name__)

DEFAULT_ROW_CAP = 50

Scalar = Union[None, bool, int, str]


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    declared_type: str
    nullable: bool = True
    is_primary_key: bool = False


@dataclass(frozen=True)
class ForeignKey:
    column: str
    ref_table: str
    ref_column: str


@dataclass(frozen=True)
class TableSchema:
    source: str
    table: str
    columns: tuple[ColumnInfo, ...]
    foreign_keys: tuple[ForeignKey, ...] = ()

    def column(self, name: str) -> ColumnInfo:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True)
class QueryResult:
    """Rows decoded into the scalar model: None, bool, int, or str.

    Decimals and floats are kept as exact decimal strings so results compare
    byte-for-byte across re-executions.
    """

    columns: tuple[str, ...]
    rows: tuple[tuple[Scalar, ...], ...]
    truncated: bool = False
    elapsed: float = field(default=0.0, compare=False)

    @property
    def row_count(self) -> int:
        return len(self.rows)

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows],
                "row_count": self.row_count, "truncated": self.truncated}

    @classmethod
    def from_dict(cls, doc: dict) -> "QueryResult":
        return cls(tuple(doc["columns"]), tuple(tuple(r) for r in doc["rows"]),
                   bool(doc.get("truncated", False)))


def decode_value(value: Any) -> Scalar:
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            return repr(value)
        return format(decimal.Decimal(repr(value)), "f")
    if isinstance(value, decimal.Decimal):
        return format(value, "f") if value.is_finite() else str(value)
    if isinstance(value, (_dt.datetime, _dt.date, _dt.time)):
        return value.isoformat()
    if isinstance(value, (bytes, bytearray, memoryview)):
        return "\\x" + bytes(value).hex()
    return str(value)


class _Backend:
    dialect = "?"

    def connect(self, decl: SourceDecl):
        raise NotImplementedError

    def prepare_sql(self, sql: str) -> str:
        return sql

    def list_tables_sql(self) -> str:
        raise NotImplementedError

    def describe(self, conn, source: str, table: str) -> TableSchema:
        raise NotImplementedError

    def error_types(self) -> tuple[type[BaseException], ...]:
        return (Exception,)


class _SQLiteBackend(_Backend):
    dialect = "sqlite"
    _ALLOWED = {sqlite3.SQLITE_SELECT, sqlite3.SQLITE_READ, sqlite3.SQLITE_FUNCTION,
                getattr(sqlite3, "SQLITE_RECURSIVE", 33)}
    _READ_PRAGMAS = {"table_info", "table_xinfo", "foreign_key_list", "index_list", "index_info"}

    def connect(self, decl: SourceDecl):
        conn_params = decl.resolved_connection()
        path = Path(conn_params.get("path") or conn_params["database"])
        if not path.exists():
            raise DataSourceError(self.dialect, f"database file not found: {path}")
        uri = f"{path.resolve().as_uri()}?mode=ro"
        conn = sqlite3.connect(uri, uri=True, check_same_thread=False)
        conn.execute("PRAGMA query_only = ON")

        def authorizer(action, arg1, *_):
            if action in self._ALLOWED:
                return sqlite3.SQLITE_OK
            if action == sqlite3.SQLITE_PRAGMA and arg1 in self._READ_PRAGMAS:
                return sqlite3.SQLITE_OK
            # schema loading for pragma functions reports an UPDATE on the catalog;
            # the connection itself is opened read-only
            if action == sqlite3.SQLITE_UPDATE and arg1 == "sqlite_master":
                return sqlite3.SQLITE_OK
            return sqlite3.SQLITE_DENY

        conn.set_authorizer(authorizer)
        return conn

    def prepare_sql(self, sql: str) -> str:
        return postgres_to_sqlite(sql)

    def list_tables_sql(self) -> str:
        return ("SELECT name FROM sqlite_master WHERE type IN ('table', 'view') "
                "AND name NOT LIKE 'sqlite_%' ORDER BY name")

    def describe(self, conn, source: str, table: str) -> TableSchema:
        cols = conn.execute(
            "SELECT name, type, \"notnull\", pk FROM pragma_table_info(?) ORDER BY cid", (table,)
        ).fetchall()
        if not cols:
            raise UnknownTableError(self.dialect, table)
        fks = conn.execute(
            "SELECT \"from\", \"table\", \"to\" FROM pragma_foreign_key_list(?) ORDER BY id, seq", (table,)
        ).fetchall()
        columns = tuple(ColumnInfo(name, decl_type or "", not notnull and not pk, bool(pk))
                        for name, decl_type, notnull, pk in cols)
        return TableSchema(source, table, columns,
                           tuple(ForeignKey(a, b, c if c is not None else "") for a, b, c in fks))

    def error_types(self):
        return (sqlite3.Error,)


class _PostgresBackend(_Backend):
    dialect = "postgres"

    def connect(self, decl: SourceDecl):
        try:
            import psycopg
        except ImportError as exc:  # pragma: no cover - depends on installed extras
            raise DataSourceError(self.dialect, "psycopg is not installed (pip install claimcheck[postgres])") from exc
        p = decl.resolved_connection()
        try:
            conn = psycopg.connect(host=p["host"], port=p.get("port") or None, dbname=p["database"],
                                   user=p.get("user") or None, password=p.get("password") or None,
                                   autocommit=True)
        except psycopg.Error as exc:
            raise DataSourceError(self.dialect, str(exc).strip()) from exc
        conn.read_only = True
        conn.execute("SET default_transaction_read_only = on")
        return conn

    def list_tables_sql(self) -> str:
        return ("SELECT table_schema || '.' || table_name FROM information_schema.tables "
                "WHERE table_schema NOT IN ('pg_catalog', 'information_schema') "
                "AND table_schema NOT LIKE 'pg_toast%' ORDER BY 1")

    def describe(self, conn, source: str, table: str) -> TableSchema:
        schema, _, name = table.rpartition(".")
        schema = schema or "public"
        cur = conn.execute(
            "SELECT c.column_name, c.data_type, c.is_nullable = 'YES', "
            "EXISTS (SELECT 1 FROM information_schema.table_constraints tc "
            "JOIN information_schema.key_column_usage k ON tc.constraint_name = k.constraint_name "
            "AND tc.table_schema = k.table_schema "
            "WHERE tc.constraint_type = 'PRIMARY KEY' AND k.table_schema = c.table_schema "
            "AND k.table_name = c.table_name AND k.column_name = c.column_name) "
            "FROM information_schema.columns c WHERE c.table_schema = %s AND c.table_name = %s "
            "ORDER BY c.ordinal_position", (schema, name))
        cols = cur.fetchall()
        if not cols:
            raise UnknownTableError(self.dialect, table)
        cur = conn.execute(
            "SELECT k.column_name, ccu.table_name, ccu.column_name "
            "FROM information_schema.table_constraints tc "
            "JOIN information_schema.key_column_usage k ON tc.constraint_name = k.constraint_name "
            "AND tc.table_schema = k.table_schema "
            "JOIN information_schema.constraint_column_usage ccu ON tc.constraint_name = ccu.constraint_name "
            "WHERE tc.constraint_type = 'FOREIGN KEY' AND tc.table_schema = %s AND tc.table_name = %s "
            "ORDER BY k.ordinal_position", (schema, name))
        fks = cur.fetchall()
        return TableSchema(source, table,
                           tuple(ColumnInfo(n, t, bool(nl), bool(pk)) for n, t, nl, pk in cols),
                           tuple(ForeignKey(a, b, c) for a, b, c in fks))

    def error_types(self):
        import psycopg
        return (psycopg.Error,)


class _MySQLBackend(_Backend):
    dialect = "mysql"

    def connect(self, decl: SourceDecl):
        try:
            import pymysql
        except ImportError as exc:  # pragma: no cover - depends on installed extras
            raise DataSourceError(self.dialect, "pymysql is not installed (pip install claimcheck[mysql])") from exc
        p = decl.resolved_connection()
        try:
            conn = pymysql.connect(host=p["host"], port=int(p.get("port") or 3306), database=p["database"],
                                   user=p.get("user") or None, password=p.get("password") or "",
                                   autocommit=True)
            with conn.cursor() as cur:
                cur.execute("SET SESSION TRANSACTION READ ONLY")
        except pymysql.Error as exc:
            raise DataSourceError(self.dialect, str(exc)) from exc
        return _MySQLAdapter(conn)

    def list_tables_sql(self) -> str:
        return ("SELECT table_name FROM information_schema.tables "
                "WHERE table_schema = DATABASE() ORDER BY table_name")

    def describe(self, conn, source: str, table: str) -> TableSchema:
        cols = conn.execute(
            "SELECT column_name, column_type, is_nullable = 'YES', column_key = 'PRI' "
            "FROM information_schema.columns WHERE table_schema = DATABASE() AND table_name = %s "
            "ORDER BY ordinal_position", (table,)).fetchall()
        if not cols:
            raise UnknownTableError(self.dialect, table)
        fks = conn.execute(
            "SELECT column_name, referenced_table_name, referenced_column_name "
            "FROM information_schema.key_column_usage WHERE table_schema = DATABASE() "
            "AND table_name = %s AND referenced_table_name IS NOT NULL ORDER BY ordinal_position",
            (table,)).fetchall()
        return TableSchema(source, table,
                           tuple(ColumnInfo(n, t, bool(nl), bool(pk)) for n, t, nl, pk in cols),
                           tuple(ForeignKey(a, b, c) for a, b, c in fks))

    def error_types(self):
        import pymysql
        return (pymysql.Error,)


class _MySQLAdapter:
    """Gives a pymysql connection the ``conn.execute(...)`` shape used here."""

    def __init__(self, conn):
        self._conn = conn

    def execute(self, sql, params=None):
        cur = self._conn.cursor()
        cur.execute(sql, params)
        return cur

    def close(self):
        self._conn.close()


_BACKENDS: dict[str, type[_Backend]] = {
    "sqlite": _SQLiteBackend,
    "postgres": _PostgresBackend,
    "mysql": _MySQLBackend,
}


class SourceHandle:
    """A lazily opened, lock-serialized connection to one declared source."""

    def __init__(self, decl: SourceDecl, backend: _Backend | None = None):
        self.decl = decl
        self._backend = backend or _BACKENDS[decl.kind]()
        self._conn = None
        self._closed = False
        self._lock = threading.Lock()

    @property
    def name(self) -> str:
        return self.decl.name

    @property
    def dialect(self) -> str:
        return self._backend.dialect

    def _connection(self):
        if self._closed:
            raise DataSourceError(self.dialect, f"connection to source {self.name} is closed")
        if self._conn is None:
            log.debug("opening %s source %s", self.dialect, self.name)
            try:
                self._conn = self._backend.connect(self.decl)
            except DataSourceError:
                raise
            except Exception as exc:
                raise DataSourceError(self.dialect, str(exc)) from exc
        return self._conn

    def close(self) -> None:
        with self._lock:
            if self._conn is not None:
                self._conn.close()
            self._conn = None
            self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def execute_sql(handle: SourceHandle, sql: str, row_cap: int = DEFAULT_ROW_CAP) -> QueryResult:
    """Run one read-only query, keeping at most ``row_cap`` rows."""
    if row_cap < 1:
        raise ValueError("row_cap must be positive")
    kind = classify_statement(sql)
    if kind is not StatementKind.READ_ONLY:
        raise ReadOnlyViolation(sql, kind.value)
    backend = handle._backend
    with handle._lock:
        conn = handle._connection()
        started = time.perf_counter()
        try:
            cur = conn.execute(backend.prepare_sql(sql))
            columns = tuple(d[0] for d in (cur.description or ()))
            fetched = cur.fetchmany(row_cap + 1) if columns else []
            try:
                cur.close()
            except Exception:  # pragma: no cover
                pass
        except backend.error_types() as exc:
            raise DataSourceError(backend.dialect, str(exc)) from exc
        elapsed = time.perf_counter() - started
    truncated = len(fetched) > row_cap
    rows = tuple(tuple(decode_value(v) for v in row) for row in fetched[:row_cap])
    return QueryResult(columns, rows, truncated, elapsed)


def list_tables(handle: SourceHandle) -> list[str]:
    backend = handle._backend
    with handle._lock:
        conn = handle._connection()
        try:
            names = [r[0] for r in conn.execute(backend.list_tables_sql()).fetchall()]
        except backend.error_types() as exc:
            raise DataSourceError(backend.dialect, str(exc)) from exc
    return sorted(names)


def describe_table(handle: SourceHandle, table: str) -> TableSchema:
    backend = handle._backend
    with handle._lock:
        conn = handle._connection()
        try:
            return backend.describe(conn, handle.name, table)
        except DataSourceError:
            raise
        except backend.error_types() as exc:
            raise DataSourceError(backend.dialect, str(exc)) from exc


class SourcePool:
    """One lazily-connected handle per declared source."""

    def __init__(self, sources: Iterable[SourceDecl]):
        self._decls = {s.name: s for s in sources}
        self._handles: dict[str, SourceHandle] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_config(cls, config: ToolboxConfig) -> "SourcePool":
        return cls(config.sources)

    @property
    def names(self) -> list[str]:
        return list(self._decls)

    def __contains__(self, name: str) -> bool:
        return name in self._decls

    def get(self, name: str) -> SourceHandle:
        if name not in self._decls:
            raise KeyError(name)
        with self._lock:
            handle = self._handles.get(name)
            if handle is None:
                handle = self._handles[name] = SourceHandle(self._decls[name])
            return handle

    def close(self) -> None:
        with self._lock:
            for h in self._handles.values():
                h.close()
            self._handles.clear()


def canonical_rows(rows: Sequence[Sequence[Scalar]]) -> list[tuple]:
    """Rows sorted by a type-tagged key, for order-insensitive comparison."""
    def key(row):
        return tuple((type(v).__name__, "" if v is None else str(v)) for v in row)
    return sorted((tuple(r) for r in rows), key=key)
