import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line: name, verdict, measured value, threshold."""
    def add(name, ok, measured, threshold):
        line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} (measured {measured}, threshold {threshold})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
