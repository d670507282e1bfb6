"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ClaimcheckError(Exception):
    """Base class for all package errors."""


class ConfigError(ClaimcheckError):
    """Invalid toolbox configuration.

    ``identifier`` names the offending source/tool/toolset when there is one;
    ``line``/``column`` are 1-based positions for YAML syntax errors.
    """

    def __init__(self, message: str, *, identifier: str | None = None,
                 line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.identifier = identifier
        self.line = line
        self.column = column


class ReadOnlyViolation(ClaimcheckError):
    def __init__(self, sql: str, kind: str):
        super().__init__(f"read-only violation: statement classified as {kind}; only a single SELECT/WITH query is allowed")
        self.sql = sql
        self.kind = kind


class DataSourceError(ClaimcheckError):
    """An error reported by a database backend; the text is kept verbatim."""

    def __init__(self, dialect: str, message: str):
        super().__init__(f"{dialect} error: {message}")
        self.dialect = dialect
        self.detail = message


class UnknownTableError(DataSourceError):
    def __init__(self, dialect: str, table: str):
        super().__init__(dialect, f"unknown table: {table}")
        self.table = table


class ProviderError(ClaimcheckError):
    """The model provider failed (after retries, for transient failures)."""


class ReplayMiss(ProviderError):
    def __init__(self, position: int, expected: str | None, actual: str):
        exp = expected if expected is not None else "<end of transcript>"
        super().__init__(f"replay miss at entry {position}: expected fingerprint {exp}, got {actual}")
        self.position = position
        self.expected = expected
        self.actual = actual


class AgentIncomplete(ClaimcheckError):
    def __init__(self, agent: str, max_turns: int):
        super().__init__(f"agent {agent} exhausted its turn budget ({max_turns} turns) without a final answer")
        self.agent = agent
        self.max_turns = max_turns


class EvidenceError(ClaimcheckError):
    """Malformed or missing evidence block."""


class VerdictParseError(ClaimcheckError):
    pass


class BenchInputError(ClaimcheckError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
