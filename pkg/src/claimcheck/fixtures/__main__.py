"""Write a ready-to-use fixture workspace: ``python -m claimcheck.fixtures DIR``.

The directory receives both sqlite databases, ``claimcheck.yaml`` (with
paths relative to DIR, so run the CLI from there), the recorded
transcripts and the mini-benchmark files.
"""

from __future__ import annotations

import argparse
import shutil
from pathlib import Path

from . import BENCH_CASES, BENCH_TRANSCRIPT_DIR, TOOLBOX_EXAMPLE, TRANSCRIPT_DIR, write_workspace


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="write a fixture workspace")
    parser.add_argument("directory")
    args = parser.parse_args(argv)
    ws = write_workspace(args.directory, relative=True)
    shutil.copytree(TRANSCRIPT_DIR, ws.root / "transcripts", dirs_exist_ok=True)
    shutil.copytree(BENCH_TRANSCRIPT_DIR, ws.root / "bench_transcripts", dirs_exist_ok=True)
    shutil.copy(BENCH_CASES, ws.root / "bench_cases.jsonl")
    shutil.copy(TOOLBOX_EXAMPLE, ws.root / "toolbox_example.yaml")
    for p in sorted(Path(ws.root).iterdir()):
        print(p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
