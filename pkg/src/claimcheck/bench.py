"""Table fact-verification benchmark: per-case sqlite ingestion, verdict mapping, resumable runs."""

from __future__ import annotations

import datetime as _dt
import json
import logging
import re
import sqlite3
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .config import SourceDecl, ToolboxConfig, ToolDecl
from .environment import build_environment
from .errors import BenchInputError
from .models import ModelProvider, Usage
from .settings import Settings
from .verifier import Claim, Verdict, verify

log = logging.getLogger(__name__)

ENTAILED, REFUTED = "entailed", "refuted"
GOLD_LABELS = (ENTAILED, REFUTED)
TYPED_THRESHOLD = Decimal("0.95")
NOTES_TABLE = "column_notes"
RESULTS_FILE = "results.jsonl"
SUMMARY_FILE = "summary.json"


@dataclass(frozen=True)
class BenchCase:
    id: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    claim: str
    gold: str
    caption: str = ""

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        if not self.id:
            raise ValueError("case id must not be empty")
        if not self.claim.strip():
            raise ValueError(f"case {self.id}: claim must not be empty")
        if self.gold not in GOLD_LABELS:
            raise ValueError(f"case {self.id}: gold must be one of {', '.join(GOLD_LABELS)}, got {self.gold!r}")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise ValueError(f"case {self.id}: row {i} has {len(row)} cells, expected {len(self.columns)}")
            if not all(isinstance(c, str) for c in row):
                raise ValueError(f"case {self.id}: row {i} has non-text cells")

    @classmethod
    def from_dict(cls, d: Mapping) -> "BenchCase":
        return cls(str(d["id"]), tuple(d["columns"]), tuple(tuple(r) for r in d["rows"]),
                   d["claim"], d["gold"], d.get("caption", ""))

    def to_dict(self) -> dict:
        d = {"id": self.id, "columns": list(self.columns), "rows": [list(r) for r in self.rows],
             "claim": self.claim, "gold": self.gold}
        if self.caption:
            d["caption"] = self.caption
        return d


def parse_cases(lines: Iterable[str]) -> list[BenchCase]:
    """Read line-delimited case records; errors name the offending line."""
    cases, seen = [], set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BenchInputError(f"invalid JSON ({exc.msg})", lineno) from exc
        if not isinstance(rec, dict):
            raise BenchInputError("record must be a JSON object", lineno)
        missing = [k for k in ("id", "columns", "rows", "claim", "gold") if k not in rec]
        if missing:
            raise BenchInputError(f"missing field {missing[0]!r}", lineno)
        try:
            case = BenchCase.from_dict(rec)
        except (ValueError, TypeError) as exc:
            raise BenchInputError(str(exc), lineno) from exc
        if case.id in seen:
            raise BenchInputError(f"duplicate case id {case.id!r}", lineno)
        seen.add(case.id)
        cases.append(case)
    return cases


def load_cases(path: str | Path) -> list[BenchCase]:
    with open(path, encoding="utf-8") as fh:
        return parse_cases(fh)


def dump_cases(cases: Iterable[BenchCase], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in cases:
            fh.write(json.dumps(c.to_dict(), ensure_ascii=False) + "\n")


def map_verdict(verdict: Verdict) -> str:
    """Any conflicting part refutes the claim, so both partial labels map to refuted."""
    return ENTAILED if verdict is Verdict.VERIFIED else REFUTED


# -- ingestion ----------------------------------------------------------------

def sanitize_identifier(name: str, fallback: str = "col") -> str:
    ident = re.sub(r"[^0-9a-z]+", "_", name.strip().lower()).strip("_")
    if not ident:
        ident = fallback
    if ident[0].isdigit():
        ident = f"{fallback}_{ident}"
    return ident


def _unique(name: str, taken: set[str]) -> str:
    out, n = name, 2
    while out in taken:
        out, n = f"{name}_{n}", n + 1
    taken.add(out)
    return out


def parse_number(text: str) -> int | Decimal | None:
    s = text.strip().replace(",", "")
    if not s:
        return None
    if re.fullmatch(r"[+-]?\d+", s):
        return int(s)
    if re.fullmatch(r"[+-]?(\d+\.\d*|\.\d+)([eE][+-]?\d+)?", s):
        try:
            return Decimal(s)
        except InvalidOperation:
            return None
    return None


_DATE_FORMATS = ("%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y", "%B %d , %Y", "%B %d, %Y", "%d %B %Y", "%b %d , %Y",
                 "%b %d, %Y", "%d %b %Y", "%B %Y")


def parse_date(text: str) -> str | None:
    s = " ".join(text.strip().split())
    if not s:
        return None
    for fmt in _DATE_FORMATS:
        try:
            return _dt.datetime.strptime(s, fmt).date().isoformat()
        except ValueError:
            continue
    return None


def _share(values: list[str], parser) -> tuple[Decimal, list]:
    nonblank = [v for v in values if v.strip()]
    parsed = [parser(v) for v in values]
    if not nonblank:
        return Decimal(0), parsed
    ok = sum(1 for v, p in zip(values, parsed) if v.strip() and p is not None)
    return Decimal(ok) / Decimal(len(nonblank)), parsed


@dataclass(frozen=True)
class IngestedColumn:
    original: str
    column: str
    typed_column: str | None = None
    typed_kind: str | None = None  # "INTEGER", "REAL" or "DATE"


@dataclass(frozen=True)
class IngestedCase:
    source: SourceDecl
    config: ToolboxConfig
    table: str
    columns: tuple[IngestedColumn, ...]
    note: str


def case_source_name(case_id: str) -> str:
    return "case_" + sanitize_identifier(case_id, "x")


def ingest_table(path: str | Path, table: str, columns: Sequence[str], rows: Sequence[Sequence[str]],
                 caption: str = "") -> tuple[tuple[IngestedColumn, ...], str]:
    """Write one text table plus typed siblings and a column-note table to a fresh sqlite file."""
    if not columns or not rows:
        raise ValueError("cannot ingest an empty table")
    path = Path(path)
    if path.exists():
        path.unlink()
    taken: set[str] = {NOTES_TABLE}
    base = [_unique(sanitize_identifier(c), taken) for c in columns]
    specs, typed_values = [], []
    for j, (orig, col) in enumerate(zip(columns, base)):
        values = [r[j] for r in rows]
        share, nums = _share(values, parse_number)
        if share >= TYPED_THRESHOLD:
            kind = "INTEGER" if all(n is None or isinstance(n, int) for n in nums) else "REAL"
            specs.append(IngestedColumn(orig, col, None, kind))
            typed_values.append([None if n is None else (n if kind == "INTEGER" else float(n)) for n in nums])
            continue
        share, dates = _share(values, parse_date)
        if share >= TYPED_THRESHOLD:
            specs.append(IngestedColumn(orig, col, None, "DATE"))
            typed_values.append(dates)
            continue
        specs.append(IngestedColumn(orig, col))
        typed_values.append(None)
    # typed sibling names are taken after every base name so they never shadow one
    specs = [IngestedColumn(s.original, s.column,
                            _unique(f"{s.column}_{'date' if s.typed_kind == 'DATE' else 'num'}", taken), s.typed_kind)
             if s.typed_kind else s for s in specs]

    ddl_cols = [f'"{s.column}" TEXT' for s in specs]
    ddl_cols += [f'"{s.typed_column}" {"TEXT" if s.typed_kind == "DATE" else s.typed_kind}'
                 for s in specs if s.typed_column]
    note_lines = []
    for s in specs:
        line = f"{s.column} holds the original column {s.original!r} as text"
        if s.typed_column:
            what = "an ISO date" if s.typed_kind == "DATE" else "a number"
            line += f"; {s.typed_column} holds the same value parsed as {what} (NULL where unparseable)"
        note_lines.append(line)
    note = (f"Table {table}" + (f" (caption: {caption})" if caption else "") + ":\n"
            + "\n".join(f"- {ln}" for ln in note_lines))

    conn = sqlite3.connect(path)
    try:
        with conn:
            conn.execute(f'CREATE TABLE "{table}" ({", ".join(ddl_cols)})')
            names = [s.column for s in specs] + [s.typed_column for s in specs if s.typed_column]
            placeholders = ", ".join("?" for _ in names)
            quoted = ", ".join(f'"{n}"' for n in names)
            typed_idx = [j for j, s in enumerate(specs) if s.typed_column]
            conn.executemany(f'INSERT INTO "{table}" ({quoted}) VALUES ({placeholders})',
                             [list(r) + [typed_values[j][i] for j in typed_idx] for i, r in enumerate(rows)])
            conn.execute(f"CREATE TABLE {NOTES_TABLE} (table_name TEXT, column_name TEXT, "
                         "original_name TEXT, typed_column TEXT, note TEXT)")
            conn.executemany(f"INSERT INTO {NOTES_TABLE} VALUES (?, ?, ?, ?, ?)",
                             [(table, s.column, s.original, s.typed_column, ln)
                              for s, ln in zip(specs, note_lines)])
    finally:
        conn.close()
    return tuple(specs), note


def source_config(source: SourceDecl) -> ToolboxConfig:
    """A source plus its three standard tools and no toolsets."""
    n = source.name
    return ToolboxConfig((source,), (
        ToolDecl(f"{n}_sql", "execute-sql", n, f"Run read-only SQL against the {n} database."),
        ToolDecl(f"{n}_list_tables", "list-tables", n, f"List the tables of the {n} database."),
        ToolDecl(f"{n}_describe_table", "describe-table", n, f"Describe one table of the {n} database."),
    ), ())


def ingest_case(case: BenchCase, directory: str | Path) -> IngestedCase:
    name = case_source_name(case.id)
    table = sanitize_identifier(case.caption, "data")[:40].rstrip("_") if case.caption else "data"
    if table == NOTES_TABLE:
        table = "data"
    path = Path(directory) / f"{name}.sqlite"
    path.parent.mkdir(parents=True, exist_ok=True)
    specs, note = ingest_table(path, table, case.columns, case.rows, case.caption)
    source = SourceDecl(name, "sqlite", {"database": str(path)})
    return IngestedCase(source, source_config(source), table, specs, note)


# -- running ------------------------------------------------------------------

@dataclass
class BenchResult:
    case_id: str
    gold: str
    verdict: Verdict | None = None
    predicted: str | None = None
    correct: bool = False
    usage: Usage = Usage()
    cost: Decimal = Decimal("0")
    failure: str | None = None
    latency: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return {"id": self.case_id, "gold": self.gold,
                "verdict": None if self.verdict is None else self.verdict.value,
                "predicted": self.predicted, "correct": self.correct, "usage": self.usage.to_dict(),
                "cost": str(self.cost), "failure": self.failure, "latency_s": round(self.latency, 3)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BenchResult":
        return cls(d["id"], d["gold"], None if d.get("verdict") is None else Verdict(d["verdict"]),
                   d.get("predicted"), bool(d.get("correct")), Usage.from_dict(d.get("usage") or {}),
                   Decimal(d.get("cost", "0")), d.get("failure"), float(d.get("latency_s", 0.0)))


@dataclass(frozen=True)
class BenchSummary:
    n_cases: int
    n_correct: int
    n_failed: int
    usage: Usage
    total_cost: Decimal
    per_case_cost: Decimal
    failures: tuple[tuple[str, str], ...] = ()

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_cases if self.n_cases else 0.0

    @property
    def mean_tokens(self) -> float:
        return self.usage.total / self.n_cases if self.n_cases else 0.0

    def to_dict(self) -> dict:
        return {"n_cases": self.n_cases, "n_correct": self.n_correct, "n_failed": self.n_failed,
                "accuracy": round(self.accuracy, 6), "usage": self.usage.to_dict(),
                "mean_tokens": round(self.mean_tokens, 3), "total_cost": str(self.total_cost),
                "per_case_cost": str(self.per_case_cost),
                "failures": [{"id": i, "reason": r} for i, r in self.failures]}


def summarize(cases: Sequence[BenchCase], results: Mapping[str, BenchResult]) -> BenchSummary:
    """Aggregate in case order; cases without a result count as failures."""
    usage, cost, correct, failures = Usage(), Decimal(0), 0, []
    for c in cases:
        r = results.get(c.id)
        if r is None:
            failures.append((c.id, "no result"))
            continue
        usage = usage + r.usage
        cost += r.cost
        correct += r.correct
        if r.failure:
            failures.append((c.id, r.failure))
    n = len(cases)
    per_case = (cost / n).quantize(Decimal("0.000001")) if n else Decimal(0)
    return BenchSummary(n, correct, len(failures), usage, cost, per_case, tuple(failures))


ProviderFactory = Callable[[BenchCase], ModelProvider]


def run_case(case: BenchCase, provider: ModelProvider, settings: Settings, work_dir: str | Path,
             trace_ref: str = "") -> BenchResult:
    start = time.perf_counter()
    try:
        ingested = ingest_case(case, work_dir)
        with build_environment(ingested.config, provider, settings, trace_ref=trace_ref) as env:
            report = verify(Claim(case.claim, case.caption), env)
    except Exception as exc:  # per-case failures are data, not crashes
        log.warning("case %s failed: %s", case.id, exc)
        return BenchResult(case.id, case.gold, failure=f"{type(exc).__name__}: {exc}",
                           latency=time.perf_counter() - start)
    predicted = map_verdict(report.verdict)
    return BenchResult(case.id, case.gold, report.verdict, predicted, predicted == case.gold,
                       report.usage, report.cost_estimate, None, time.perf_counter() - start)


def load_results(path: str | Path) -> dict[str, BenchResult]:
    out: dict[str, BenchResult] = {}
    p = Path(path)
    if not p.exists():
        return out
    for line in p.read_text(encoding="utf-8").splitlines():
        try:
            r = BenchResult.from_dict(json.loads(line))
        except (json.JSONDecodeError, KeyError, ValueError):
            continue  # a torn final line from an interrupted run
        out[r.case_id] = r
    return out


def run_bench(cases: Sequence[BenchCase], provider_factory: ProviderFactory, settings: Settings | None = None,
              *, parallelism: int = 1, out_dir: str | Path | None = None, resume: bool = False,
              trace_ref: Callable[[BenchCase], str] | None = None) -> tuple[BenchSummary, dict[str, BenchResult]]:
    """Verify every case against its own database; results are appended as they finish."""
    if parallelism < 1:
        raise ValueError("parallelism must be at least 1")
    settings = settings or Settings()
    tmp = None
    if out_dir is None:
        tmp = tempfile.TemporaryDirectory(prefix="claimcheck-bench-")
        out = Path(tmp.name)
    else:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
    results_path = out / RESULTS_FILE
    results = load_results(results_path) if resume else {}
    if not resume and results_path.exists():
        results_path.unlink()
    known = {c.id for c in cases}
    results = {k: v for k, v in results.items() if k in known}
    todo = [c for c in cases if c.id not in results]
    log.info("bench: %d cases, %d already done, %d to run", len(cases), len(results), len(todo))
    lock = threading.Lock()

    def work(case: BenchCase) -> BenchResult:
        try:
            provider = provider_factory(case)
        except Exception as exc:
            result = BenchResult(case.id, case.gold, failure=f"{type(exc).__name__}: {exc}")
        else:
            ref = trace_ref(case) if trace_ref else ""
            result = run_case(case, provider, settings, out / "databases", ref)
        with lock:
            with open(results_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(result.to_dict(), ensure_ascii=False) + "\n")
            results[case.id] = result
        return result

    try:
        if parallelism == 1:
            for case in todo:
                work(case)
        else:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                for fut in [pool.submit(work, c) for c in todo]:
                    fut.result()
        summary = summarize(cases, results)
        (out / SUMMARY_FILE).write_text(json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8")
        return summary, {c.id: results[c.id] for c in cases if c.id in results}
    finally:
        if tmp is not None:
            tmp.cleanup()
