import numpy as np
import pytest

from sclab.fixtures import get_fixture
from sclab.meshspec import build_stack

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str = "") -> None:
    prev = ACCEPTANCE.get(criterion)
    if prev is not None:
        passed = passed and prev[0]
        detail = "; ".join(d for d in (prev[1], detail) if d)
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in range(1, 9):
        if c not in ACCEPTANCE:
            terminalreporter.write_line("criterion %d: NOT RUN" % c)
            continue
        ok, detail = ACCEPTANCE[c]
        terminalreporter.write_line("criterion %d: %s  %s" % (c, "PASS" if ok else "FAIL", detail))


@pytest.fixture(scope="session")
def stacks():
    cache = {}

    def get(name, rotated=False):
        key = (name, rotated)
        if key not in cache:
            cache[key] = build_stack(get_fixture(name), rotated=rotated)
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
