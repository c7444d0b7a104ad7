import numpy as np
import pytest

from comlab.rng import RngStream

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return RngStream(20240917)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_log():
    def record(number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {title} :: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
