import pytest

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    """Print a criterion's one-line verdict and keep it for the session summary."""
    def record(res):
        line = res.line()
        print(line)
        ACCEPTANCE_LINES.append(line)
        return res
    return record
