"""Command-line entry point: ``claimcheck <command> ...``.

Exit codes: 0 success, 1 a run finished with failures, 2 usage or config errors.
The last line on standard output is the verdict or accuracy line.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Sequence

from .bench import ingest_table, load_cases, run_bench, source_config
from .config import SourceDecl, ToolboxConfig, load_config, serialize, validate
from .environment import build_environment
from .errors import BenchInputError, ClaimcheckError, ConfigError
from .models import (API_KEY_ENV, MissingCredentials, ModelProvider, RecordingProvider, RemoteProvider,
                     ReplayProvider, Transcript)
from .settings import Settings
from .verifier import Claim, dump_document, render_report, verify

log = logging.getLogger("claimcheck")

MODES = ("live", "record", "replay")


class UsageError(Exception):
    """Bad flags or inputs; maps to exit code 2."""


def _load_config(path: str) -> ToolboxConfig:
    try:
        return load_config(path)
    except FileNotFoundError as exc:
        raise UsageError(f"config file not found: {path}") from exc
    except ConfigError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _settings(config: ToolboxConfig | None) -> Settings:
    try:
        return Settings.from_mapping(config.settings if config else None)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"agents settings: {exc}") from exc


def _remote() -> RemoteProvider:
    try:
        return RemoteProvider.from_env()
    except MissingCredentials as exc:
        raise UsageError(f"{exc}; set {API_KEY_ENV} to use live or record mode") from exc


def _provider(mode: str, transcript: str | None, meta: dict) -> ModelProvider:
    if mode == "replay":
        if not transcript:
            raise UsageError("--mode replay requires --transcript")
        if not Path(transcript).is_file():
            raise UsageError(f"transcript not found: {transcript}")
        return ReplayProvider(transcript)
    if mode == "record":
        if not transcript:
            raise UsageError("--mode record requires --transcript")
        return RecordingProvider(_remote(), transcript, meta)
    return _remote()


def _out_paths(out: str) -> tuple[Path, Path]:
    p = Path(out)
    base = p.with_suffix("") if p.suffix in (".md", ".json") else p
    return base.with_suffix(".md"), base.with_suffix(".json")


def _run_verify(config_path: str, claim: Claim, mode: str, transcript: str | None, out: str | None) -> int:
    config = _load_config(config_path)
    settings = _settings(config)
    provider = _provider(mode, transcript, {"claim": claim.text, "context": claim.context})
    with build_environment(config, provider, settings, trace_ref=transcript or "") as env:
        report = verify(claim, env)
    markdown, document = render_report(report)
    if out:
        md_path, json_path = _out_paths(out)
        md_path.parent.mkdir(parents=True, exist_ok=True)
        md_path.write_text(markdown, encoding="utf-8")
        json_path.write_text(dump_document(document), encoding="utf-8")
        print(f"wrote {md_path} and {json_path}")
    else:
        print(markdown)
    for flag in report.flags:
        print(f"warning: {flag}", file=sys.stderr)
    print(f"Verdict: {report.verdict.value}")
    return 0


def cmd_verify(args) -> int:
    if args.claim_file:
        try:
            text = Path(args.claim_file).read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise UsageError(f"cannot read claim file: {exc}") from exc
    else:
        text = args.claim.strip()
    if not text:
        raise UsageError("claim must not be empty")
    return _run_verify(args.config, Claim(text, args.context or ""), args.mode, args.transcript, args.out)


def cmd_replay(args) -> int:
    try:
        meta = Transcript.load(args.transcript).metadata
    except FileNotFoundError as exc:
        raise UsageError(f"transcript not found: {args.transcript}") from exc
    if not meta.get("claim"):
        raise UsageError(f"{args.transcript}: transcript metadata has no claim")
    claim = Claim(meta["claim"], meta.get("context", ""))
    return _run_verify(args.config, claim, "replay", args.transcript, args.out)


def cmd_bench(args) -> int:
    if args.parallelism < 1:
        raise UsageError("--parallelism must be at least 1")
    try:
        cases = load_cases(args.cases)
    except FileNotFoundError as exc:
        raise UsageError(f"cases file not found: {args.cases}") from exc
    except BenchInputError as exc:
        raise UsageError(f"{args.cases}: {exc}") from exc
    settings = _settings(_load_config(args.config) if args.config else None)
    out = Path(args.out)
    tdir = Path(args.transcripts) if args.transcripts else out / "transcripts"

    if args.mode == "replay":
        if not tdir.is_dir():
            raise UsageError(f"transcript directory not found: {tdir}")

        def factory(case):
            return ReplayProvider(tdir / f"{case.id}.jsonl")
    else:
        remote = _remote()
        if args.mode == "record":
            tdir.mkdir(parents=True, exist_ok=True)

            def factory(case):
                return RecordingProvider(remote, tdir / f"{case.id}.jsonl", {"case": case.id, "claim": case.claim})
        else:
            def factory(case):
                return remote

    summary, _ = run_bench(cases, factory, settings, parallelism=args.parallelism, out_dir=out,
                           resume=args.resume, trace_ref=lambda c: str(tdir / f"{c.id}.jsonl"))
    for case_id, reason in summary.failures:
        print(f"failed {case_id}: {reason}", file=sys.stderr)
    print(f"cases: {summary.n_cases}  correct: {summary.n_correct}  failed: {summary.n_failed}  "
          f"tokens: {summary.usage.total}  cost: {summary.total_cost}")
    print(f"accuracy: {summary.accuracy:.3f}")
    return 1 if summary.n_failed else 0


def cmd_ingest(args) -> int:
    try:
        with open(args.csv, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [r for r in reader if r]
    except OSError as exc:
        raise UsageError(f"cannot read CSV: {exc}") from exc
    if not header or not rows:
        raise UsageError(f"{args.csv}: CSV has no header or no rows")
    bad = [i for i, r in enumerate(rows, 2) if len(r) != len(header)]
    if bad:
        raise UsageError(f"{args.csv}: line {bad[0]} has {len(rows[bad[0] - 2])} cells, expected {len(header)}")
    table = args.table or Path(args.csv).stem
    source = args.source or Path(args.db).stem
    specs, note = ingest_table(args.db, table, header, rows)
    fragment = serialize(source_config(SourceDecl(source, "sqlite", {"database": args.db})))
    if args.config_out:
        Path(args.config_out).write_text(fragment, encoding="utf-8")
        print(f"wrote {args.db} ({len(rows)} rows) and {args.config_out}")
    else:
        print(fragment, end="")
    print(note, file=sys.stderr)
    return 0


def cmd_config_validate(args) -> int:
    config = _load_config(args.config)
    diagnostics = validate(config)
    for d in diagnostics:
        print(f"{d.severity}: {d.path}: {d.message}")
    if any(d.severity == "error" for d in diagnostics):
        return 2
    if diagnostics:
        return 1
    print(f"ok: {len(config.sources)} sources, {len(config.tools)} tools, {len(config.toolsets)} toolsets")
    return 0


def cmd_tools_list(args) -> int:
    config = _load_config(args.config)
    grouped = set()
    for ts in config.toolsets:
        print(f"{ts.name}:")
        for name in ts.tools:
            t = config.tool(name)
            grouped.add(name)
            print(f"  - {t.name} ({t.kind}, source {t.source})")
    loose = [t for t in config.tools if t.name not in grouped]
    if loose:
        print("(no toolset):")
        for t in loose:
            print(f"  - {t.name} ({t.kind}, source {t.source})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="claimcheck", description="Verify claims against relational data with SQL evidence.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="verify one claim")
    v.add_argument("--config", required=True)
    claim = v.add_mutually_exclusive_group(required=True)
    claim.add_argument("--claim")
    claim.add_argument("--claim-file")
    v.add_argument("--context", help="optional context such as the date of the statement")
    v.add_argument("--mode", required=True, choices=MODES)
    v.add_argument("--transcript", help="transcript to replay from or record to")
    v.add_argument("--out", help="write the report to OUT.md and OUT.json")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="run a benchmark file")
    b.add_argument("--config", help="optional config whose agents section supplies settings")
    b.add_argument("--cases", required=True)
    b.add_argument("--mode", required=True, choices=MODES)
    b.add_argument("--parallelism", type=int, default=1)
    b.add_argument("--resume", action="store_true")
    b.add_argument("--out", required=True, help="directory for results.jsonl and summary.json")
    b.add_argument("--transcripts", help="per-case transcript directory (default OUT/transcripts)")
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("ingest", help="load a CSV file into a sqlite source")
    i.add_argument("--csv", required=True)
    i.add_argument("--db", required=True)
    i.add_argument("--source", help="source name (default: database file stem)")
    i.add_argument("--table", help="table name (default: CSV file stem)")
    i.add_argument("--config-out", help="write the config fragment here instead of stdout")
    i.set_defaults(func=cmd_ingest)

    c = sub.add_parser("config-validate", help="check a config file")
    c.add_argument("--config", required=True)
    c.set_defaults(func=cmd_config_validate)

    t = sub.add_parser("tools-list", help="print toolsets and their tools")
    t.add_argument("--config", required=True)
    t.set_defaults(func=cmd_tools_list)

    r = sub.add_parser("replay", help="re-render a report from a stored transcript, offline")
    r.add_argument("--config", required=True)
    r.add_argument("--transcript", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except ClaimcheckError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
