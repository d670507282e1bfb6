from __future__ import annotations

import pytest

from claimcheck.config import load_config
from claimcheck.datasource import SourcePool
from claimcheck.fixtures import write_workspace


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """Fixture databases and config shared read-only across the session."""
    return write_workspace(tmp_path_factory.mktemp("workspace"))


@pytest.fixture
def fresh_workspace(tmp_path):
    """A private copy for tests that mutate the data."""
    return write_workspace(tmp_path / "ws")


@pytest.fixture(scope="session")
def config(workspace):
    return load_config(workspace.config)


@pytest.fixture
def pool(config):
    p = SourcePool.from_config(config)
    yield p
    p.close()
