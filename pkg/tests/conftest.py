import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "src"))
sys.path.insert(0, ROOT)

from expconcavify.losses.catalog import catalog_loss  # noqa: E402


@pytest.fixture
def log_loss():
    return catalog_loss("log")


@pytest.fixture
def square_scalar():
    return catalog_loss("square_scalar")


@pytest.fixture
def square_vector():
    return catalog_loss("square_vector")


@pytest.fixture
def boosting():
    return catalog_loss("boosting")


@pytest.fixture
def cli_env(tmp_path, monkeypatch):
    """Runs CLI calls inside tmp_path with logs and output kept there."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("EXPCONCAVIFY_LOG_FILE", str(tmp_path / "logs" / "cli.log"))
    monkeypatch.setenv("EXPCONCAVIFY_OUTPUT_DIR", str(tmp_path / "output"))
    return tmp_path
