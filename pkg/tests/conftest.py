import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    def record(number, passed, detail):
        ACCEPTANCE_LINES.append((number, f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
