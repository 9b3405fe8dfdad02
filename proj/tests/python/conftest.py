import os
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[2]


@pytest.fixture
def fixtures():
    return Path(os.environ.get("RECON_FIXTURES", ROOT / "tests" / "fixtures"))


@pytest.fixture
def root():
    return ROOT
