"""Shared fixtures for the simulator and CLI tests."""

import pytest

from scenario_doc import make_quiet_doc


@pytest.fixture
def quiet_doc():
    return make_quiet_doc
