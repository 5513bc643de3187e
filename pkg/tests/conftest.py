import pytest

# criterion lines collected by test_acceptance.py, echoed after the run
VERDICTS = []


@pytest.fixture
def verdict():
    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        VERDICTS.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance")
        for _, line in sorted(VERDICTS):
            terminalreporter.write_line(line)
