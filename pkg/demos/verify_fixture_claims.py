"""Walk through the three fixture claims offline.

Builds the fixture databases in a temporary directory, replays each recorded
transcript through the real agents, prints the report, then re-runs the
evidence queries to show they reproduce.

    python demos/verify_fixture_claims.py
"""

from __future__ import annotations

import tempfile

from claimcheck.config import load_config
from claimcheck.environment import build_environment
from claimcheck.fixtures import TRANSCRIPT_DIR, write_workspace
from claimcheck.fixtures.scenarios import SCENARIOS
from claimcheck.models import ReplayProvider
from claimcheck.verifier import render_report, validate_evidence, verify


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        config = load_config(write_workspace(tmp).config)
        for name, sc in SCENARIOS.items():
            transcript = TRANSCRIPT_DIR / f"{name}.jsonl"
            with build_environment(config, ReplayProvider(transcript), trace_ref=transcript.name) as env:
                report = verify(sc.claim, env)
                outcome = validate_evidence(report, env) if report.evidence else None
            markdown, _ = render_report(report)
            print("=" * 72)
            print(markdown)
            calls = [f"{r.agent} ({r.turn_count} turns)" for r in report.expert_runs]
            print(f"expert calls: {', '.join(calls)}")
            if outcome is not None:
                print(f"evidence reproduces: {outcome.overall}")


if __name__ == "__main__":
    main()
