import os
import sys
import time

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_LINES: dict[int, str] = {}
_START = time.perf_counter()
SUITE_BUDGET_S = 15 * 60


@pytest.fixture
def report():
    """Record and print one PASS/FAIL line for a numbered acceptance criterion."""

    def _report(num: int, ok: bool, detail: str):
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES[num] = line
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_LINES):
        tr.write_line(_LINES[num])
    wall = time.perf_counter() - _START
    verdict = "PASS" if wall < SUITE_BUDGET_S else "FAIL"
    tr.write_line(f"session wall time {wall:.0f} s (budget {SUITE_BUDGET_S} s): {verdict}")
