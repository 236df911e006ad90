import pytest

ACCEPTANCE = []


@pytest.fixture
def accept():
    """Record one acceptance line: ``accept(criterion, passed, detail)``."""
    def record(criterion, passed, detail=""):
        ACCEPTANCE.append((criterion, bool(passed), detail))
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}")
