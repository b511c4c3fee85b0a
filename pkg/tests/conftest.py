import json
import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qsurrogate.harness import experiment  # noqa: E402

# PASS/FAIL lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []

TINY_DE = {"gtol": 15, "max_gens": 100}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks")
    os.environ.setdefault("MPLBACKEND", "Agg")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def write_tiny_spec(root: Path, fmt: str = "json", **cell_overrides) -> Path:
    """Two 8-vertex instances and a single cheap cell; returns the spec path."""
    experiment.generate_manifest(root / "instances" / "manifest.json", "maxcut", 2, seed=3, n=8)
    cell = {
        "label": "tiny",
        "instances": "all",
        "p": 1,
        "shots": 50,
        "n_init": 6,
        "n_it": 4,
        "n_repeats": 2,
        "de": TINY_DE,
    }
    cell.update(cell_overrides)
    data = {"manifest": "instances/manifest.json", "output_dir": "out", "master_seed": 1, "cells": [cell]}
    path = root / f"spec.{fmt}"
    if fmt == "json":
        path.write_text(json.dumps(data))
    else:
        lines = [
            'manifest = "instances/manifest.json"',
            'output_dir = "out"',
            "master_seed = 1",
            "[[cells]]",
        ]
        for k, v in cell.items():
            if isinstance(v, dict):
                v = "{ " + ", ".join(f"{a} = {b}" for a, b in v.items()) + " }"
            else:
                v = json.dumps(v)
            lines.append(f"{k} = {v}")
        path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def tiny_spec(tmp_path):
    return write_tiny_spec(tmp_path)
