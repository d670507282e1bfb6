"""Live model checks; skipped unless CLAIMCHECK_API_KEY is set.

Only well-formedness and reproducibility are asserted, never a particular verdict.
"""

from __future__ import annotations

import os
from decimal import Decimal

import pytest

from claimcheck.environment import build_environment
from claimcheck.models import API_KEY_ENV, RecordingProvider, RemoteProvider, ReplayProvider
from claimcheck.verifier import Claim, Verdict, parse_report_markdown, render_report, validate_evidence, verify

pytestmark = [pytest.mark.live,
              pytest.mark.skipif(not os.environ.get(API_KEY_ENV), reason=f"{API_KEY_ENV} is not set")]

CLAIM = Claim("The crime_data table has more violent crime incidents with an offense date in 2024 than in 2023.")


def test_live_record_then_replay(config, tmp_path):
    path = tmp_path / "live.jsonl"
    with build_environment(config, RecordingProvider(RemoteProvider.from_env(), path)) as env:
        report = verify(CLAIM, env)
        assert report.verdict in set(Verdict)
        assert report.evidence and validate_evidence(report, env).overall
    md, doc = render_report(report)
    assert parse_report_markdown(md) == doc
    assert report.cost_estimate <= Decimal("0.25")  # USD, with the config's prices
    with build_environment(config, ReplayProvider(path)) as env:
        again = verify(CLAIM, env)
    assert again.to_document() == report.to_document()
