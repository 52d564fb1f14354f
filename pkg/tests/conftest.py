import json
import logging
import sys
from pathlib import Path

import numpy as np
import pytest

from distkmeans import DataMatrix, load_iris, load_wine

HERE = Path(__file__).parent
FIXTURES = HERE.parent / "fixtures"


@pytest.fixture(autouse=True)
def _quiet_fallback_warnings(caplog):
    # zero-mean centroid fallbacks are expected on tiny correlation instances
    caplog.set_level(logging.ERROR, logger="distkmeans.metrics")


@pytest.fixture(scope="session")
def golden():
    return json.loads((HERE / "golden" / "rng.json").read_text())


@pytest.fixture(scope="session")
def iris():
    return load_iris()


@pytest.fixture(scope="session")
def wine():
    return load_wine()


@pytest.fixture
def line4():
    """1-D points 0, 1, 9, 10."""
    return DataMatrix(np.array([[0.0], [1.0], [9.0], [10.0]]))


def check_trace(trace, n):
    """Shared trace invariants: phase order, monotone/strict descent, final row."""
    assert trace, "empty trace"
    phases = [r.phase for r in trace]
    assert phases == sorted(phases)
    assert [r.iter for r in trace] == list(range(trace[0].iter, trace[0].iter + len(trace)))
    for r in trace:
        assert 0 <= r.num <= n
        assert r.sum >= 0
    for prev, cur in zip(trace, trace[1:]):
        if cur.phase == 1:
            assert cur.sum <= prev.sum
        elif cur.num == 1:
            assert cur.sum < prev.sum
    assert trace[-1].phase == 2 and trace[-1].num == 0


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
