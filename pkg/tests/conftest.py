import math
import time

import numpy as np
import pytest

from activescalar.spectral import make_grid

_SESSION_START = time.perf_counter()
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, passed: bool, detail: str):
    line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_collection_modifyitems(items):
    # acceptance runs go last so criterion 11 can time the rest of the suite
    items.sort(key=lambda item: item.get_closest_marker("acceptance") is not None)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        tr.write_line(line)
    elapsed = time.perf_counter() - _SESSION_START
    tr.write_line(f"full suite wall time {elapsed:.1f} s "
                  f"({'within' if elapsed < 600 else 'over'} the 10 min budget)")


@pytest.fixture
def grid64():
    return make_grid(2, [64, 64], [2 * math.pi, 2 * math.pi])


@pytest.fixture
def grid32():
    return make_grid(2, [32, 32], [2 * math.pi, 2 * math.pi])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
