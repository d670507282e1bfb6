"""The lead agent: coordinates the experts, returns a verdict and a re-runnable report."""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Mapping

from . import prompts
from .agent import AgentRun, AgentSpec, resume_agent, run_agent
from .datasource import QueryResult, SourcePool, canonical_rows, execute_sql
from .environment import Environment
from .errors import (AgentIncomplete, ClaimcheckError, EvidenceError, ReadOnlyViolation,
                     VerdictParseError)
from .experts import EvidenceQuery, expert_tools, extract_evidence, format_evidence
from .models import Usage

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Claim:
    text: str
    context: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("claim text must not be empty")


class Verdict(str, enum.Enum):
    VERIFIED = "Verified"
    PARTLY_VERIFIED = "Partly Verified"
    PARTLY_INACCURATE = "Partly Inaccurate"
    INACCURATE = "Inaccurate"

    @classmethod
    def from_label(cls, label: str) -> "Verdict":
        key = re.sub(r"[\s_\-]+", "", label).lower()
        for v in cls:
            if v.value.replace(" ", "").lower() == key:
                return v
        raise VerdictParseError(f"unknown verdict label {label!r}; allowed labels: {', '.join(LABELS)}")


LABELS = tuple(v.value for v in Verdict)

_VERDICT_LINE = re.compile(r"^verdict\s*:\s*(.*)$", re.IGNORECASE)


def _strip_markup(line: str) -> str:
    return line.strip().strip("*_#>`-– \t").replace("**", "").replace("__", "")


def parse_verdict(text: str) -> Verdict:
    """Read the ``Verdict: <label>`` line, tolerating bold/markdown wrappers.

    Several verdict lines are fine when they agree; disagreeing lines are an
    error rather than last-one-wins.
    """
    found: list[Verdict] = []
    unknown: list[str] = []
    for line in text.splitlines():
        m = _VERDICT_LINE.match(_strip_markup(line))
        if not m:
            continue
        label = m.group(1).strip().strip("*_`.!").strip()
        try:
            found.append(Verdict.from_label(label))
        except VerdictParseError:
            unknown.append(label)
    if not found:
        if unknown:
            raise VerdictParseError(f"unknown verdict label {unknown[-1]!r}; allowed labels: {', '.join(LABELS)}")
        raise VerdictParseError(f"no 'Verdict: <label>' line found; allowed labels: {', '.join(LABELS)}")
    if len(set(found)) > 1:
        raise VerdictParseError("ambiguous verdict: " + ", ".join(v.value for v in found))
    return found[-1]


# -- parsing the verifier's free-form report ---------------------------------

_SECTIONS = {
    "findings": "findings", "key findings": "findings",
    "conclusion": "conclusion", "summary conclusion": "conclusion", "summary": "conclusion",
    "assumptions": "assumptions", "assumptions and notes": "assumptions", "notes": "assumptions",
    "evidence": "evidence", "evidence queries": "evidence",
}
_HEADING = re.compile(r"^(?P<name>[A-Za-z][A-Za-z ]*?)\s*(?::\s*(?P<rest>.*))?$")
_BULLET = re.compile(r"^\s*(?:[-*•–]|\d+[.)])\s+(.*)$")


def _section_of(line: str) -> tuple[str, str] | None:
    stripped = line.strip()
    if not stripped or stripped.startswith("```"):
        return None
    is_marked = stripped.startswith("#") or stripped.startswith("**") or stripped.startswith("__")
    plain = stripped.lstrip("#").strip()
    plain = re.sub(r"^(\*\*|__)(.+?)(\*\*|__)", r"\2", plain)
    m = _HEADING.match(plain)
    if not m:
        return None
    name = m.group("name").strip().lower()
    if name not in _SECTIONS:
        return None
    if not is_marked and m.group("rest") is None:
        return None
    rest = (m.group("rest") or "").strip().strip("*_").strip()
    return _SECTIONS[name], rest


def _one_line(text: str) -> str:
    return " ".join(text.split())


def parse_report_sections(text: str) -> dict[str, Any]:
    """Split a model-written report into findings, conclusion and assumptions."""
    buckets: dict[str, list[str]] = {"findings": [], "conclusion": [], "assumptions": [], "evidence": []}
    current = None
    in_fence = False
    for line in text.splitlines():
        if line.strip().startswith(("```", "~~~")):
            in_fence = not in_fence
            continue
        if in_fence:
            continue
        if _VERDICT_LINE.match(_strip_markup(line)):
            current = None
            continue
        sec = _section_of(line)
        if sec is not None:
            current = sec[0]
            if sec[1]:
                buckets[current].append(sec[1])
            continue
        if current is not None:
            buckets[current].append(line)

    def items(lines):
        out, cur = [], None
        for ln in lines:
            m = _BULLET.match(ln)
            if m:
                if cur is not None:
                    out.append(cur)
                cur = m.group(1)
            elif ln.strip():
                cur = ln.strip() if cur is None else f"{cur} {ln.strip()}"
            elif cur is not None:
                out.append(cur)
                cur = None
        if cur is not None:
            out.append(cur)
        return [_one_line(i) for i in out if i.strip()]

    conclusion_lines = [(_BULLET.match(ln).group(1) if _BULLET.match(ln) else ln).rstrip()
                        for ln in buckets["conclusion"]]
    return {
        "findings": items(buckets["findings"]),
        "conclusion": "\n".join(conclusion_lines).strip(),
        "assumptions": items(buckets["assumptions"]),
    }


# -- report ------------------------------------------------------------------

@dataclass
class VerificationReport:
    claim: Claim
    verdict: Verdict
    findings: list[str]
    conclusion: str
    assumptions: list[str] = field(default_factory=list)
    evidence: list[EvidenceQuery] = field(default_factory=list)
    usage: Usage = Usage()
    usage_by_model: dict[str, Usage] = field(default_factory=dict)
    cost_estimate: Decimal = Decimal("0")
    trace_ref: str = ""
    flags: list[str] = field(default_factory=list)
    # every agent run behind this report: the verifier's first, then each expert call
    runs: list[AgentRun] = field(default_factory=list, compare=False, repr=False)

    @property
    def verifier_run(self) -> AgentRun | None:
        return self.runs[0] if self.runs else None

    @property
    def expert_runs(self) -> list[AgentRun]:
        return self.runs[1:]

    def to_document(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "claim": {"text": self.claim.text, "context": self.claim.context},
            "verdict": self.verdict.value,
            "findings": list(self.findings),
            "conclusion": self.conclusion,
            "assumptions": list(self.assumptions),
            "evidence": [e.to_dict() for e in self.evidence],
            "usage": {**self.usage.to_dict(),
                      "by_model": {m: u.to_dict() for m, u in sorted(self.usage_by_model.items())}},
            "cost_estimate": str(self.cost_estimate),
            "trace_ref": self.trace_ref,
            "flags": list(self.flags),
        }

    @classmethod
    def from_document(cls, doc: Mapping) -> "VerificationReport":
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported report format_version {doc.get('format_version')!r}")
        usage = doc.get("usage") or {}
        return cls(
            Claim(doc["claim"]["text"], doc["claim"].get("context", "")),
            Verdict(doc["verdict"]),
            list(doc.get("findings", [])),
            doc.get("conclusion", ""),
            list(doc.get("assumptions", [])),
            [EvidenceQuery.from_dict(e) for e in doc.get("evidence", [])],
            Usage.from_dict(usage),
            {m: Usage.from_dict(u) for m, u in (usage.get("by_model") or {}).items()},
            Decimal(doc.get("cost_estimate", "0")),
            doc.get("trace_ref", ""),
            list(doc.get("flags", [])),
        )


def dump_document(doc: Mapping) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# -- verify --------------------------------------------------------------------

def render_claim(claim: Claim) -> str:
    text = f"Claim to verify:\n{claim.text.strip()}"
    if claim.context.strip():
        text += f"\n\nContext: {claim.context.strip()}"
    return text


def verifier_spec(env: Environment, tools) -> AgentSpec:
    s = env.settings
    return AgentSpec("verifier", prompts.VERIFIER, tools, env.provider, s.verifier_model,
                     s.verifier_max_turns, prompts.VERIFIER_CONTRACT, s.sampling)


def verify(claim: Claim, env: Environment) -> VerificationReport:
    """Run the verifier on ``claim`` and capture its evidence against the live sources."""
    expert_runs: list[AgentRun] = []
    bundle = env.experts
    tools = expert_tools(bundle, max_chars=env.settings.data_summary_max_chars, on_run=expert_runs.append)
    spec = verifier_spec(env, tools)

    run = run_agent(spec, render_claim(claim))
    if not run.complete:
        raise AgentIncomplete(spec.name, spec.max_turns)
    try:
        verdict = parse_verdict(run.final_text)
    except VerdictParseError as first:
        log.info("verdict missing (%s); asking once more", first)
        run = resume_agent(spec, run, prompts.VERDICT_RETRY)
        if not run.complete:
            raise AgentIncomplete(spec.name, spec.max_turns)
        verdict = parse_verdict(run.final_text)

    flags: list[str] = []
    sections = parse_report_sections(run.final_text)
    try:
        evidence = extract_evidence(run.final_text, required=False)
    except (EvidenceError, ReadOnlyViolation) as exc:
        flags.append(f"verifier evidence unusable: {_one_line(str(exc))}")
        evidence = []
    if not evidence:
        evidence = _expert_evidence(expert_runs)
        if evidence:
            flags.append("verifier cited no evidence; using the SQL Expert's evidence")
    if not evidence:
        flags.append("no evidence queries")

    captured, capture_flags = capture_evidence(evidence, env.pool, env.settings.evidence_row_cap)
    flags.extend(capture_flags)

    runs = [run, *expert_runs]
    by_model: dict[str, Usage] = {}
    for r in runs:
        by_model[r.model_id] = by_model.get(r.model_id, Usage()) + r.usage
    total = Usage()
    for u in by_model.values():
        total = total + u
    return VerificationReport(
        claim, verdict, sections["findings"], sections["conclusion"], sections["assumptions"],
        captured, total, by_model, env.settings.cost(by_model), env.trace_ref, flags, runs,
    )


def _expert_evidence(runs: list[AgentRun]) -> list[EvidenceQuery]:
    out: list[EvidenceQuery] = []
    for r in runs:
        if r.agent == "sql_expert" and r.complete:
            try:
                out.extend(extract_evidence(r.final_text, required=False))
            except (EvidenceError, ReadOnlyViolation):
                continue
    return out


def capture_evidence(evidence: list[EvidenceQuery], pool: SourcePool,
                     row_cap: int) -> tuple[list[EvidenceQuery], list[str]]:
    out, flags = [], []
    for i, ev in enumerate(evidence, 1):
        if ev.source not in pool:
            flags.append(f"evidence {i}: unknown source {ev.source}")
            out.append(ev)
            continue
        try:
            result = execute_sql(pool.get(ev.source), ev.sql, row_cap)
        except ClaimcheckError as exc:
            flags.append(f"evidence {i}: re-execution failed: {_one_line(str(exc))}")
            out.append(ev)
            continue
        out.append(EvidenceQuery(ev.source, ev.sql, result))
    return out, flags


# -- reproducibility ----------------------------------------------------------

@dataclass(frozen=True)
class QueryCheck:
    index: int
    match: bool
    diff: str = ""


@dataclass(frozen=True)
class ReproducibilityOutcome:
    checks: tuple[QueryCheck, ...]

    @property
    def overall(self) -> bool:
        return bool(self.checks) and all(c.match for c in self.checks)

    def summary(self) -> str:
        return "\n".join(f"query {c.index}: {'match' if c.match else 'MISMATCH ' + c.diff}" for c in self.checks)


def _fmt_row(row) -> str:
    return "(" + ", ".join("NULL" if v is None else repr(v) for v in row) + ")"


def diff_results(expected: QueryResult, actual: QueryResult, limit: int = 3) -> str:
    if tuple(expected.columns) != tuple(actual.columns):
        return f"columns differ: expected {list(expected.columns)}, got {list(actual.columns)}"
    exp, act = canonical_rows(expected.rows), canonical_rows(actual.rows)
    if exp == act and expected.truncated == actual.truncated:
        return ""
    missing, extra = list(exp), []
    for row in act:
        if row in missing:
            missing.remove(row)
        else:
            extra.append(row)
    parts = [f"{len(exp)} rows captured, {len(act)} rows now"]
    if missing:
        parts.append(f"{len(missing)} missing e.g. " + "; ".join(_fmt_row(r) for r in missing[:limit]))
    if extra:
        parts.append(f"{len(extra)} new e.g. " + "; ".join(_fmt_row(r) for r in extra[:limit]))
    if expected.truncated != actual.truncated:
        parts.append(f"truncated {expected.truncated} -> {actual.truncated}")
    return "; ".join(parts)


def validate_evidence(report: VerificationReport, env: Environment | SourcePool,
                      row_cap: int | None = None) -> ReproducibilityOutcome:
    """Re-run every evidence query and compare with the captured result."""
    if not report.evidence:
        raise ValueError("report has no evidence to validate")
    pool = env.pool if isinstance(env, Environment) else env
    if row_cap is None:
        row_cap = env.settings.evidence_row_cap if isinstance(env, Environment) else 1000
    checks = []
    for i, ev in enumerate(report.evidence, 1):
        if ev.captured_result is None:
            checks.append(QueryCheck(i, False, "no captured result"))
            continue
        if ev.source not in pool:
            checks.append(QueryCheck(i, False, f"unknown source {ev.source}"))
            continue
        try:
            now = execute_sql(pool.get(ev.source), ev.sql, max(row_cap, ev.captured_result.row_count))
        except ClaimcheckError as exc:
            checks.append(QueryCheck(i, False, f"re-execution failed: {exc}"))
            continue
        diff = diff_results(ev.captured_result, now)
        checks.append(QueryCheck(i, not diff, diff))
    return ReproducibilityOutcome(tuple(checks))


# -- markdown rendering ------------------------------------------------------

_INT = re.compile(r"^-?\d+$")


def _needs_quotes(text: str) -> bool:
    return (text == "" or text != text.strip() or text in ("NULL", "true", "false")
            or bool(_INT.match(text)) or text.startswith('"') or any(c in text for c in "|\n\r\\"))


def _enc_text(text: str) -> str:
    if _needs_quotes(text):
        return json.dumps(text, ensure_ascii=False).replace("|", "\\u007c")
    return text


def _enc_cell(value) -> str:
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return _enc_text(str(value))


def _dec_cell(text: str, header: bool = False):
    if text.startswith('"'):
        return json.loads(text)
    if header:
        return text
    if text == "NULL":
        return None
    if text in ("true", "false"):
        return text == "true"
    if _INT.match(text):
        return int(text)
    return text


def _split_row(line: str) -> list[str]:
    inner = line.strip()[1:-1]
    return [c.strip() for c in inner.split(" | ")] if inner.strip() else []


def _render_table(result: QueryResult) -> list[str]:
    lines = ["| " + " | ".join(_enc_text(c) for c in result.columns) + " |",
             "|" + "|".join(" --- " for _ in result.columns) + "|"]
    lines += ["| " + " | ".join(_enc_cell(v) for v in row) + " |" for row in result.rows]
    n = result.row_count
    lines.append(f"({n} row{'' if n == 1 else 's'}{', truncated' if result.truncated else ''})")
    return lines


def _quote_block(text: str) -> list[str]:
    return [f"> {ln}" if ln else ">" for ln in text.split("\n")]


def _unquote_block(lines: list[str]) -> str:
    return "\n".join(ln[2:] if ln.startswith("> ") else ln[1:] for ln in lines)


def render_report(report: VerificationReport) -> tuple[str, dict]:
    """Markdown for people plus the structured document with the same content."""
    out = ["# Claim verification report", "", "## Claim", *_quote_block(report.claim.text)]
    if report.claim.context:
        out += ["", "Context:", *_quote_block(report.claim.context)]
    out += ["", "## Findings", *[f"- {f}" for f in report.findings], ""]
    out += ["## Conclusion", report.conclusion, ""]
    if report.assumptions:
        out += ["## Assumptions", *[f"- {a}" for a in report.assumptions], ""]
    out += ["## Verdict", f"Verdict: {report.verdict.value}", ""]
    out += ["## Evidence"]
    for i, ev in enumerate(report.evidence, 1):
        out += ["", f"### Query {i}", format_evidence(ev.source, ev.sql)]
        if ev.captured_result is None:
            out.append("(no captured result)")
        else:
            out += _render_table(ev.captured_result)
    out += ["", "## Run details", f"- format version: {FORMAT_VERSION}",
            f"- input tokens: {report.usage.input_tokens}",
            f"- output tokens: {report.usage.output_tokens}"]
    for model, u in sorted(report.usage_by_model.items()):
        out.append(f"- model {_enc_text(model)}: {u.input_tokens} input, {u.output_tokens} output")
    out.append(f"- cost estimate (USD): {report.cost_estimate}")
    out.append(f"- transcript: {_enc_text(report.trace_ref) if report.trace_ref else ''}".rstrip())
    out += [f"- flag: {_enc_text(f)}" for f in report.flags]
    return "\n".join(out) + "\n", report.to_document()


def parse_report_markdown(text: str) -> dict:
    """Rebuild the structured document from :func:`render_report` output."""
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.split("\n"):
        if line.startswith("## "):
            current = line[3:].strip()
            sections[current] = []
        elif current is not None:
            sections[current].append(line)

    claim_lines = sections.get("Claim", [])
    if "Context:" in claim_lines:
        k = claim_lines.index("Context:")
        claim_text = _unquote_block([ln for ln in claim_lines[:k] if ln.startswith(">")])
        context = _unquote_block([ln for ln in claim_lines[k + 1:] if ln.startswith(">")])
    else:
        claim_text = _unquote_block([ln for ln in claim_lines if ln.startswith(">")])
        context = ""

    def bullets(name):
        return [ln[2:] for ln in sections.get(name, []) if ln.startswith("- ")]

    verdict = parse_verdict("\n".join(sections.get("Verdict", [])))
    conclusion = "\n".join(sections.get("Conclusion", [])).strip("\n")

    evidence = []
    ev_lines = sections.get("Evidence", [])
    i = 0
    while i < len(ev_lines):
        if not ev_lines[i].startswith("### Query"):
            i += 1
            continue
        j = i + 1
        while j < len(ev_lines) and not ev_lines[j].startswith("```"):
            j += 1
        k = j + 1
        while k < len(ev_lines) and ev_lines[k] != "```":
            k += 1
        (ev,) = extract_evidence("\n".join(ev_lines[j:k + 1]))
        table, k = [], k + 1
        while k < len(ev_lines) and not ev_lines[k].startswith("### Query"):
            table.append(ev_lines[k])
            k += 1
        evidence.append({"source": ev.source, "sql": ev.sql, "result": _parse_table(table)})
        i = k

    usage = {"input_tokens": 0, "output_tokens": 0, "by_model": {}}
    cost, trace_ref, flags = "0", "", []
    for ln in sections.get("Run details", []):
        if ln.startswith("- input tokens: "):
            usage["input_tokens"] = int(ln.rsplit(" ", 1)[1])
        elif ln.startswith("- output tokens: "):
            usage["output_tokens"] = int(ln.rsplit(" ", 1)[1])
        elif ln.startswith("- model "):
            m = re.match(r"^- model (.+): (\d+) input, (\d+) output$", ln)
            usage["by_model"][_dec_cell(m.group(1), header=True)] = {
                "input_tokens": int(m.group(2)), "output_tokens": int(m.group(3))}
        elif ln.startswith("- cost estimate (USD): "):
            cost = ln.split(": ", 1)[1]
        elif ln.startswith("- transcript:"):
            rest = ln[len("- transcript:"):].strip()
            trace_ref = _dec_cell(rest, header=True) if rest else ""
        elif ln.startswith("- flag: "):
            flags.append(_dec_cell(ln[len("- flag: "):], header=True))

    return {
        "format_version": FORMAT_VERSION,
        "claim": {"text": claim_text, "context": context},
        "verdict": verdict.value,
        "findings": bullets("Findings"),
        "conclusion": conclusion,
        "assumptions": bullets("Assumptions"),
        "evidence": evidence,
        "usage": usage,
        "cost_estimate": cost,
        "trace_ref": trace_ref,
        "flags": flags,
    }


def _parse_table(lines: list[str]) -> dict | None:
    lines = [ln for ln in lines if ln.strip()]
    if not lines or lines[0] == "(no captured result)":
        return None
    columns = [_dec_cell(c, header=True) for c in _split_row(lines[0])]
    footer = lines[-1]
    rows = [[_dec_cell(c) for c in _split_row(ln)] for ln in lines[2:-1]]
    if not columns:
        rows = [[] for _ in rows]
    return {"columns": columns, "rows": rows, "row_count": len(rows), "truncated": "truncated" in footer}
