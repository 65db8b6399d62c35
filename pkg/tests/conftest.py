"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import pytest

from rbmflow.sampler import generate_dataset
from rbmflow.thermometer import calibrate

_criteria = {}


@pytest.fixture(scope="session")
def curve_20():
    """Calibration of a 20x20 dataset on T = 0, 0.1, ..., 9.9 (about three minutes)."""
    return calibrate(generate_dataset(20, 100, base_seed=7))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    number = getattr(item.function, "criterion", None)
    if number is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        detail = dict(item.user_properties).get("detail", "")
        if report.failed and not detail:
            detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
        _criteria[number] = (item.function.title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, verdict, detail = _criteria[number]
        terminalreporter.write_line(f"criterion {number} [{verdict}] {title}: {detail}")
