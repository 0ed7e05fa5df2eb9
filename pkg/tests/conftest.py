import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_outcomes: dict = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.failed:
        prev = _outcomes.get(name, "PASS")
        _outcomes[name] = "FAIL" if (report.failed or prev == "FAIL") else ("PASS" if report.passed else "SKIP")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    from test_acceptance import ACCEPTANCE

    terminalreporter.section("acceptance criteria")
    for test, label in ACCEPTANCE.items():
        terminalreporter.write_line(f"{label}: {_outcomes.get(test, 'NOT RUN')}")
