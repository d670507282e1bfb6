"""Regenerate the committed transcripts and the mini-benchmark case file.

    python -m claimcheck.fixtures.record [--csv]

Runs every scripted scenario through the real agents with a recording
provider.  ``--csv`` also rewrites ``crime.csv`` from the generator.
"""

from __future__ import annotations

import argparse
import logging
import tempfile
from pathlib import Path

from ..bench import dump_cases, run_case
from ..config import load_config
from ..environment import build_environment
from ..models import RecordingProvider
from ..settings import Settings
from ..verifier import verify
from . import (BENCH_CASES, BENCH_TRANSCRIPT_DIR, TRANSCRIPT_DIR, write_crime_csv, write_workspace)
from .scenarios import MINI_BENCH, SCENARIOS, bench_provider

log = logging.getLogger(__name__)


def record_scenarios(dest: Path = TRANSCRIPT_DIR) -> list[Path]:
    dest.mkdir(parents=True, exist_ok=True)
    out = []
    with tempfile.TemporaryDirectory() as tmp:
        ws = write_workspace(tmp)
        config = load_config(ws.config)
        for name, sc in SCENARIOS.items():
            path = dest / f"{name}.jsonl"
            meta = {"scenario": name, "claim": sc.claim.text, "context": sc.claim.context}
            provider = RecordingProvider(sc.provider(), path, meta)
            with build_environment(config, provider, trace_ref=path.name) as env:
                report = verify(sc.claim, env)
            if report.verdict.value != sc.verdict:
                raise RuntimeError(f"scenario {name}: expected {sc.verdict}, got {report.verdict.value}")
            out.append(path)
    return out


def record_bench(dest: Path = BENCH_TRANSCRIPT_DIR, cases_path: Path = BENCH_CASES) -> list[Path]:
    dest.mkdir(parents=True, exist_ok=True)
    dump_cases([sc.case for sc in MINI_BENCH], cases_path)
    out = []
    with tempfile.TemporaryDirectory() as tmp:
        for sc in MINI_BENCH:
            path = dest / f"{sc.case.id}.jsonl"
            provider = RecordingProvider(bench_provider(sc), path, {"case": sc.case.id, "claim": sc.case.claim})
            result = run_case(sc.case, provider, Settings(), tmp, path.name)
            if result.failure or not result.correct:
                raise RuntimeError(f"bench case {sc.case.id}: {result.failure or 'wrong verdict'}")
            out.append(path)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", action="store_true", help="also rewrite crime.csv from the generator")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    if args.csv:
        log.info("wrote %s", write_crime_csv())
    for p in record_scenarios() + record_bench():
        log.info("wrote %s", p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
