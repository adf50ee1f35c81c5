from __future__ import annotations

from pathlib import Path

import pytest

from vid2dialog.gateway import MockBackend
from vid2dialog.pipeline import read_dataset, run_pipeline

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory) -> Path:
    """One full mock-backend pipeline run over the fixture corpus, shared."""
    out = tmp_path_factory.mktemp("pipeline-run")
    run_pipeline(FIXTURES / "manifest.json", MockBackend(seed=7), 7, out)
    return out


@pytest.fixture(scope="session")
def dataset(pipeline_run):
    return read_dataset(pipeline_run)
