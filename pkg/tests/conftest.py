import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mccshap.dataset import DataMatrix  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def correlated_data():
    """300 rows, 4 correlated numeric features (fixed seed)."""
    r = np.random.default_rng(7)
    mix = np.array([[1.0, 0.6, 0.2, 0.0],
                    [0.0, 0.8, 0.5, 0.1],
                    [0.0, 0.0, 0.7, 0.4],
                    [0.0, 0.0, 0.0, 0.9]])
    X = r.standard_normal((300, 4)) @ mix + np.array([1.0, -2.0, 0.5, 3.0])
    return DataMatrix(X, ["a", "b", "c", "d"])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
