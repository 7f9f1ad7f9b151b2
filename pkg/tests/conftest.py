import pytest

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        _acceptance_results[name] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(_acceptance_results.items()):
        mark = "PASS" if outcome == "PASSED" else outcome
        terminalreporter.write_line(f"{mark}  {name}")


@pytest.fixture(scope="session")
def fixtures_dir():
    import pathlib
    return pathlib.Path(__file__).resolve().parent.parent / "fixtures"
