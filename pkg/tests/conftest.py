# wmv-stability/tests/conftest.py

import sys
from pathlib import Path

import pytest

# Add project root to Python path
project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from wmv_stability import config  # noqa: E402


@pytest.fixture
def running_example():
    return config.RUNNING_EXAMPLE


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / 'out'
    path.mkdir()
    return path
