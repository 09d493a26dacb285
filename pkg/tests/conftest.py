import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from enhash.stream import make_instances  # noqa: E402


def random_stream(rng, n, d, classes, grid=None, drift_at=None):
    """Uniform features in [0, 1]^d with labels from a random linear scorer.

    ``grid`` snaps features to a lattice (forces repeated points and exact
    mean coincidences); ``drift_at`` permutes the labels from that step on.
    """
    X = rng.random((n, d))
    if grid:
        X = np.round(X / grid) * grid
    W = rng.standard_normal((classes, d))
    y = np.argmax(X @ W.T + 0.3 * rng.standard_normal((n, classes)), axis=1)
    if drift_at is not None and classes > 1:
        y[drift_at:] = (y[drift_at:] + 1) % classes
    return make_instances(X, y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one verdict line per acceptance criterion, printed after the test run
ACCEPTANCE = []


def verdict(criterion, ok, detail):
    status = "PASS" if ok is True else ("FAIL" if ok is False else ok)
    line = f"criterion {criterion}: {status}  {detail}"
    ACCEPTANCE.append((criterion, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE, key=lambda item: item[0]):
            terminalreporter.write_line(line)
