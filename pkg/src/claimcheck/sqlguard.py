"""Conservative SQL statement classification and a small Postgres-to-SQLite shim.

Both work on the same hand-rolled lexer.  The classifier only needs to know
where statements start and end and which bare keywords appear, so a full
grammar is unnecessary; anything it cannot prove to be a single SELECT/WITH
query is treated as not read-only.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass


class StatementKind(str, enum.Enum):
    READ_ONLY = "read_only"
    MUTATING = "mutating"
    MULTI_STATEMENT = "multi_statement"
    UNPARSEABLE = "unparseable"


class LexError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # ws, comment, string, qident, word, number, punct, op, param
    text: str

    @property
    def significant(self) -> bool:
        return self.kind not in ("ws", "comment")

    @property
    def upper(self) -> str:
        return self.text.upper()


_WORD = re.compile(r"[^\W\d][\w$]*")
_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_DOLLAR_TAG = re.compile(r"\$([A-Za-z_][A-Za-z0-9_]*)?\$")
_OPS = ("::", "<=", ">=", "<>", "!=", "||", "->>", "->", "==")


def tokenize(sql: str) -> list[Token]:
    """Split ``sql`` into tokens; concatenating their text reproduces the input."""
    out: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        c = sql[i]
        if c.isspace():
            j = i
            while j < n and sql[j].isspace():
                j += 1
            out.append(Token("ws", sql[i:j]))
            i = j
        elif sql.startswith("--", i):
            j = sql.find("\n", i)
            j = n if j < 0 else j
            out.append(Token("comment", sql[i:j]))
            i = j
        elif sql.startswith("/*", i):
            j = sql.find("*/", i + 2)
            if j < 0:
                raise LexError("unterminated block comment")
            out.append(Token("comment", sql[i:j + 2]))
            i = j + 2
        elif c == "'" or (c in "eEnN" and sql.startswith("'", i + 1)):
            start = i
            i = i + 1 if c == "'" else i + 2
            while True:
                if i >= n:
                    raise LexError("unterminated string literal")
                if sql[i] == "\\" and c in "eE":
                    i += 2
                    continue
                if sql[i] == "'":
                    if i + 1 < n and sql[i + 1] == "'":
                        i += 2
                        continue
                    i += 1
                    break
                i += 1
            out.append(Token("string", sql[start:i]))
        elif c in "\"`[":
            close = {"\"": "\"", "`": "`", "[": "]"}[c]
            j = i + 1
            while True:
                j = sql.find(close, j)
                if j < 0:
                    raise LexError("unterminated quoted identifier")
                if close != "]" and j + 1 < n and sql[j + 1] == close:
                    j += 2
                    continue
                break
            out.append(Token("qident", sql[i:j + 1]))
            i = j + 1
        elif c == "$":
            m = _DOLLAR_TAG.match(sql, i)
            if m:
                tag = m.group(0)
                j = sql.find(tag, m.end())
                if j < 0:
                    raise LexError("unterminated dollar-quoted string")
                out.append(Token("string", sql[i:j + len(tag)]))
                i = j + len(tag)
            else:
                m = re.compile(r"\$\d+").match(sql, i)
                j = m.end() if m else i + 1
                out.append(Token("param", sql[i:j]))
                i = j
        elif _NUMBER.match(sql, i):
            m = _NUMBER.match(sql, i)
            out.append(Token("number", m.group(0)))
            i = m.end()
        elif _WORD.match(sql, i):
            m = _WORD.match(sql, i)
            out.append(Token("word", m.group(0)))
            i = m.end()
        elif c in "(),;.":
            out.append(Token("punct", c))
            i += 1
        else:
            for op in _OPS:
                if sql.startswith(op, i):
                    out.append(Token("op", op))
                    i += len(op)
                    break
            else:
                out.append(Token("op", c))
                i += 1
    return out


_READ_STARTERS = {"SELECT", "WITH", "VALUES"}

_MUTATING_STARTERS = {
    "INSERT", "UPDATE", "DELETE", "MERGE", "REPLACE", "UPSERT", "CREATE", "ALTER",
    "DROP", "TRUNCATE", "RENAME", "GRANT", "REVOKE", "BEGIN", "START", "COMMIT",
    "ROLLBACK", "SAVEPOINT", "RELEASE", "SET", "RESET", "USE", "COPY", "LOAD",
    "VACUUM", "ANALYZE", "OPTIMIZE", "REINDEX", "CLUSTER", "REFRESH", "CALL",
    "EXEC", "EXECUTE", "DO", "LOCK", "UNLOCK", "ATTACH", "DETACH", "PRAGMA",
    "COMMENT", "DISCARD", "NOTIFY", "LISTEN", "PREPARE", "DEALLOCATE", "FLUSH",
    "KILL", "HANDLER", "SECURITY", "IMPORT",
}

# Keywords that have no business inside a read-only query body.
_BODY_FORBIDDEN = {
    "INSERT", "UPDATE", "DELETE", "MERGE", "UPSERT", "DROP", "CREATE", "ALTER",
    "TRUNCATE", "GRANT", "REVOKE", "ATTACH", "DETACH", "PRAGMA", "VACUUM",
    "REINDEX", "COPY", "INTO", "LOCK", "CALL", "EXECUTE", "EXEC", "OUTFILE",
    "DUMPFILE",
}

# Functions with side effects, flagged only when called.
_SIDE_EFFECT_FUNCTIONS = {
    "NEXTVAL", "SETVAL", "SET_CONFIG", "LO_IMPORT", "LO_EXPORT", "LO_UNLINK",
    "LOAD_EXTENSION", "PG_TERMINATE_BACKEND", "PG_CANCEL_BACKEND", "DBLINK_EXEC",
    "PG_RELOAD_CONF", "PG_ROTATE_LOGFILE", "WRITEFILE",
}


def split_statements(tokens: list[Token]) -> list[list[Token]]:
    """Group significant tokens into statements separated by top-level ``;``."""
    statements: list[list[Token]] = []
    current: list[Token] = []
    for tok in tokens:
        if not tok.significant:
            continue
        if tok.kind == "punct" and tok.text == ";":
            if current:
                statements.append(current)
            current = []
        else:
            current.append(tok)
    if current:
        statements.append(current)
    return statements


def classify_statement(sql: str) -> StatementKind:
    """Classify ``sql``; only a provable single SELECT/WITH/VALUES is read-only."""
    try:
        tokens = tokenize(sql)
    except LexError:
        return StatementKind.UNPARSEABLE
    statements = split_statements(tokens)
    if not statements:
        return StatementKind.UNPARSEABLE
    if len(statements) > 1:
        return StatementKind.MULTI_STATEMENT
    stmt = statements[0]

    head = 0
    while head < len(stmt) and stmt[head].text == "(":
        head += 1
    if head == len(stmt) or stmt[head].kind != "word":
        return StatementKind.UNPARSEABLE
    first = stmt[head].upper
    if first in _MUTATING_STARTERS:
        return StatementKind.MUTATING
    if first not in _READ_STARTERS:
        return StatementKind.UNPARSEABLE

    depth = 0
    for k, tok in enumerate(stmt):
        if tok.kind == "punct":
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
                if depth < 0:
                    return StatementKind.UNPARSEABLE
        elif tok.kind == "word":
            word = tok.upper
            if word in _BODY_FORBIDDEN:
                return StatementKind.MUTATING
            if word in _SIDE_EFFECT_FUNCTIONS:
                nxt = stmt[k + 1] if k + 1 < len(stmt) else None
                if nxt is not None and nxt.text == "(":
                    return StatementKind.MUTATING
    if depth != 0:
        return StatementKind.UNPARSEABLE
    return StatementKind.READ_ONLY


def is_read_only(sql: str) -> bool:
    return classify_statement(sql) is StatementKind.READ_ONLY


def normalize_whitespace(sql: str) -> str:
    """Collapse whitespace and drop comments and a trailing semicolon (for comparisons)."""
    try:
        toks = [t for t in tokenize(sql) if t.kind != "comment"]
    except LexError:
        return " ".join(sql.split())
    text = "".join(" " if t.kind == "ws" else t.text for t in toks).strip()
    text = text.rstrip(";").strip()
    text = re.sub(r"\s*([(),])\s*", r"\1", text)
    return text


# -- Postgres compatibility for SQLite ---------------------------------------

_CAST_TYPES = {
    "INT": "INTEGER", "INTEGER": "INTEGER", "INT2": "INTEGER", "INT4": "INTEGER",
    "INT8": "INTEGER", "BIGINT": "INTEGER", "SMALLINT": "INTEGER",
    "BOOL": "INTEGER", "BOOLEAN": "INTEGER",
    "NUMERIC": "NUMERIC", "DECIMAL": "NUMERIC",
    "REAL": "REAL", "FLOAT": "REAL", "FLOAT4": "REAL", "FLOAT8": "REAL", "DOUBLE": "REAL",
    "TEXT": "TEXT", "VARCHAR": "TEXT", "CHAR": "TEXT", "CHARACTER": "TEXT",
}

_EXTRACT_FORMATS = {
    "YEAR": "%Y", "MONTH": "%m", "DAY": "%d", "HOUR": "%H", "MINUTE": "%M",
    "SECOND": "%S", "DOW": "%w", "DOY": "%j", "EPOCH": "%s",
}


def _tok(kind: str, text: str) -> Token:
    return Token(kind, text)


def _matching_open(out: list[Token], close_idx: int) -> int:
    depth = 0
    for k in range(close_idx, -1, -1):
        t = out[k]
        if t.kind == "punct" and t.text == ")":
            depth += 1
        elif t.kind == "punct" and t.text == "(":
            depth -= 1
            if depth == 0:
                return k
    raise LexError("unbalanced parentheses")


def _operand_start(out: list[Token]) -> int:
    """Index in ``out`` where the operand preceding a ``::`` begins."""
    k = len(out) - 1
    while k >= 0 and not out[k].significant:
        k -= 1
    if k < 0:
        raise LexError("cast without operand")
    if out[k].kind == "punct" and out[k].text == ")":
        k = _matching_open(out, k)
        if k > 0 and out[k - 1].kind == "word":
            k -= 1
        return k
    # identifier chains such as t.col
    while k >= 2 and out[k - 1].text == "." and out[k - 2].kind in ("word", "qident"):
        k -= 2
    return k


def _find_close(tokens: list[Token], open_idx: int) -> int:
    depth = 0
    for k in range(open_idx, len(tokens)):
        t = tokens[k]
        if t.kind == "punct" and t.text == "(":
            depth += 1
        elif t.kind == "punct" and t.text == ")":
            depth -= 1
            if depth == 0:
                return k
    raise LexError("unbalanced parentheses")


def _next_sig(tokens: list[Token], k: int) -> int:
    while k < len(tokens) and not tokens[k].significant:
        k += 1
    return k


def _translate(tokens: list[Token]) -> list[Token]:
    out: list[Token] = []
    i = 0
    n = len(tokens)
    while i < n:
        t = tokens[i]
        if t.kind == "word" and t.upper == "EXTRACT":
            p = _next_sig(tokens, i + 1)
            if p < n and tokens[p].text == "(":
                close = _find_close(tokens, p)
                inner = tokens[p + 1:close]
                sig = [k for k, x in enumerate(inner) if x.significant]
                if len(sig) >= 3 and inner[sig[1]].upper == "FROM":
                    field = inner[sig[0]].upper.strip("'")
                    expr = _translate(inner[sig[1] + 1:])
                    out.extend(_extract_tokens(field, expr))
                    i = close + 1
                    continue
        if t.kind == "op" and t.text == "::":
            start = _operand_start(out)
            operand = out[start:]
            del out[start:]
            j = _next_sig(tokens, i + 1)
            if j >= n or tokens[j].kind != "word":
                raise LexError("cast without type")
            type_name = tokens[j].upper
            j += 1
            if type_name == "DOUBLE":
                k = _next_sig(tokens, j)
                if k < n and tokens[k].upper == "PRECISION":
                    j = k + 1
            elif type_name in ("TIMESTAMP", "TIME"):
                k = _next_sig(tokens, j)
                if k < n and tokens[k].upper in ("WITH", "WITHOUT"):
                    for _ in ("TIME", "ZONE"):
                        k = _next_sig(tokens, k + 1)
                    j = k + 1
            k = _next_sig(tokens, j)
            if k < n and tokens[k].text == "(":
                j = _find_close(tokens, k) + 1
            out.extend(_cast_tokens(operand, type_name))
            i = j
            continue
        if t.kind == "word" and t.upper == "PUBLIC" or t.kind == "qident" and t.text == '"public"':
            k = _next_sig(tokens, i + 1)
            if k < n and tokens[k].text == "." and k == i + 1:
                i = k + 1
                continue
        if t.kind == "word" and t.upper == "ILIKE":
            out.append(_tok("word", "LIKE"))
            i += 1
            continue
        out.append(t)
        i += 1
    return out


def _extract_tokens(field: str, expr: list[Token]) -> list[Token]:
    if field == "QUARTER":
        month = [_tok("word", "CAST"), _tok("punct", "("), _tok("word", "strftime"),
                 _tok("punct", "("), _tok("string", "'%m'"), _tok("punct", ","),
                 _tok("ws", " "), *expr, _tok("punct", ")"), _tok("ws", " "),
                 _tok("word", "AS"), _tok("ws", " "), _tok("word", "INTEGER"), _tok("punct", ")")]
        return [_tok("punct", "("), _tok("punct", "("), *month, _tok("op", "+"),
                _tok("number", "2"), _tok("punct", ")"), _tok("op", "/"),
                _tok("number", "3"), _tok("punct", ")")]
    fmt = _EXTRACT_FORMATS.get(field)
    if fmt is None:
        raise LexError(f"unsupported EXTRACT field {field}")
    return [_tok("word", "CAST"), _tok("punct", "("), _tok("word", "strftime"),
            _tok("punct", "("), _tok("string", f"'{fmt}'"), _tok("punct", ","),
            _tok("ws", " "), *expr, _tok("punct", ")"), _tok("ws", " "),
            _tok("word", "AS"), _tok("ws", " "), _tok("word", "INTEGER"), _tok("punct", ")")]


def _cast_tokens(operand: list[Token], type_name: str) -> list[Token]:
    if type_name == "DATE":
        return [_tok("word", "date"), _tok("punct", "("), *operand, _tok("punct", ")")]
    if type_name in ("TIMESTAMP", "TIMESTAMPTZ", "DATETIME"):
        return [_tok("word", "datetime"), _tok("punct", "("), *operand, _tok("punct", ")")]
    target = _CAST_TYPES.get(type_name, type_name)
    return [_tok("word", "CAST"), _tok("punct", "("), *operand, _tok("ws", " "),
            _tok("word", "AS"), _tok("ws", " "), _tok("word", target), _tok("punct", ")")]


def postgres_to_sqlite(sql: str) -> str:
    """Rewrite the few Postgres idioms that commonly show up in analytical queries.

    Handles ``expr::type`` casts, ``EXTRACT(field FROM expr)``, the ``public.``
    schema qualifier and ``ILIKE``.  Returns ``sql`` unchanged when it cannot
    be rewritten, so SQLite reports its own error.
    """
    try:
        return "".join(t.text for t in _translate(tokenize(sql)))
    except LexError:
        return sql
