import numpy as np
import pytest

_criteria = []


def pytest_runtest_logreport(report):
    if "acceptance" in report.keywords and (report.when == "call" or report.outcome != "passed"):
        if report.when == "call" or report.outcome == "failed":
            outcome = "xfail" if hasattr(report, "wasxfail") and report.outcome == "skipped" else report.outcome
            _criteria.append((report.nodeid.split("::")[-1], outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _criteria:
        tag = {"passed": "PASS", "xfail": "FAIL (known)"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"{tag}  {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
