"""Run the 20-case mini-benchmark from its recorded transcripts.

Each case gets its own sqlite database built from the case table.  The run
is interrupted partway, then resumed, to show that finished cases are kept.

    python demos/mini_benchmark.py
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from claimcheck.bench import load_cases, run_bench
from claimcheck.fixtures import BENCH_CASES, BENCH_TRANSCRIPT_DIR
from claimcheck.models import ReplayProvider


def replay(case):
    return ReplayProvider(BENCH_TRANSCRIPT_DIR / f"{case.id}.jsonl")


def main() -> None:
    cases = load_cases(BENCH_CASES)
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        run_bench(cases[:8], replay, out_dir=out)
        print(f"first pass finished {len((out / 'results.jsonl').read_text().splitlines())} cases")
        summary, results = run_bench(cases, replay, parallelism=4, out_dir=out, resume=True)
        for case in cases:
            r = results[case.id]
            print(f"{case.id}  gold={case.gold:<8}  verdict={r.verdict.value:<17}  correct={r.correct}")
        print(json.dumps(summary.to_dict(), indent=2))


if __name__ == "__main__":
    main()
