# tests/conftest.py
"""
Shared fixtures: a fresh settings singleton per test and temporary output directories.
"""

import pytest

from src.core.analytic_states import from_db
from src.utils.config_manager import ConfigManager


@pytest.fixture(autouse=True)
def reset_settings():
    """Every test starts from config/settings.yaml, unaffected by earlier overrides."""
    ConfigManager.reset()
    yield
    ConfigManager.reset()


@pytest.fixture
def settings():
    return ConfigManager.get_settings()


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "results"
    path.mkdir()
    return path


@pytest.fixture
def one_db():
    return from_db(1.0)
