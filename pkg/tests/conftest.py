import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one summary line per acceptance criterion."""
    def record(n, ok, text):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {text}"
        ACCEPTANCE_LINES.append((n, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
