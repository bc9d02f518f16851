import pytest

_criteria: dict[str, list[str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    criterion = dict(report.user_properties).get("criterion")
    if criterion is None:
        return
    outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    _criteria.setdefault(criterion, []).append(outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_criteria, key=lambda c: int(c.split()[0])):
        outcomes = _criteria[criterion]
        status = "FAIL" if "FAIL" in outcomes else ("SKIP" if set(outcomes) == {"SKIP"} else "PASS")
        terminalreporter.write_line(f"[{status}] {criterion}")


@pytest.fixture
def criterion(record_property):
    """Tag a test with the acceptance criterion it checks."""

    def tag(label: str) -> None:
        record_property("criterion", label)

    return tag
