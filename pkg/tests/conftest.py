"""Prints the acceptance verdict lines collected by ``test_acceptance``."""

import pytest

_LINES: dict = {}


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str) -> str:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        _LINES[number] = line
        print(line)
        return line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_LINES):
        terminalreporter.write_line(_LINES[number])
