"""Shared fixtures: logs generated through the simulator's command line."""

import subprocess
from importlib import resources
from pathlib import Path

import pytest


def _scenario(name: str) -> Path:
    return Path(str(resources.files("redmux").joinpath("scenarios", name)))


def _generate(scenario: str, mode: str, out: Path) -> Path:
    cmd = ["redmux", "run", str(_scenario(scenario)), f"mode={mode}",
           "-o", str(out)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="session")
def drink_merged_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("logs") / "drink_merged.csv"
    return _generate("drink_serving.json", "merged", out)


@pytest.fixture(scope="session")
def drink_traditional_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("logs") / "drink_traditional.csv"
    return _generate("drink_serving.json", "traditional", out)


@pytest.fixture(scope="session")
def circle_merged_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("logs") / "circle_merged.csv"
    return _generate("circle.json", "merged", out)
