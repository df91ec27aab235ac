"""Shared fixtures; puts the project root on sys.path like the standalone scripts did."""

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import pytest  # noqa: E402

import config  # noqa: E402
from procedure import noise_free  # noqa: E402


@pytest.fixture
def settings():
    return config.Settings()


@pytest.fixture
def quiet_settings():
    return noise_free(config.Settings())
