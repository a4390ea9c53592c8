import json
from pathlib import Path

import numpy as np
import pytest

from ggc.var import validate_and_build_model

ROOT = Path(__file__).resolve().parents[1]
CHAIN_MODEL_PATH = ROOT / "models" / "stokes_purdon_example1.json"

# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def chain_model():
    doc = json.loads(CHAIN_MODEL_PATH.read_text())
    return validate_and_build_model(doc["coeffs"], doc["sigma"])


@pytest.fixture
def ln125_model():
    # x_t = 0.5 y_{t-1} + e_x, y white: F_{y->x} = ln 1.25
    return validate_and_build_model([[[0.0, 0.5], [0.0, 0.0]]], np.eye(2))


@pytest.fixture
def independent_model():
    return validate_and_build_model([[[0.6, 0.0], [0.0, -0.4]]], np.diag([1.0, 2.0]))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
