import numpy as np
import pytest

import treepoisson as tp


@pytest.fixture(scope="session")
def regular3():
    """Radius-2 ball of the 3-regular tree with a binary tail: the full 3-regular tree."""
    return tp.regular_ball(3, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
