import numpy as np
import pytest

from ibpdn import _kernels

_ACCEPTANCE_LINES = []


def record_criterion(number: int, name: str, passed: bool, detail: str = "") -> None:
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {name}"
    if detail:
        line += f"  ({detail})"
    _ACCEPTANCE_LINES.append((number, line))
    print(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_report_header(config):
    return f"ibpdn kernel backend: {_kernels.BACKEND}"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
