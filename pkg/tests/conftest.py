import math

import pytest

from grushin_weyl.geometry import GrushinParams


@pytest.fixture(scope="session")
def critical():
    """alpha = 1/2, n = 9 on the 2 pi cylinder."""
    return GrushinParams(0.5, 9, period=2 * math.pi)


def pytest_terminal_summary(terminalreporter):
    """Echo one PASS/FAIL line per acceptance criterion after the run."""
    lines = []
    for outcome in ("passed", "failed", "xfailed", "xpassed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            label = getattr(report, "criterion_label", None)
            if label and (report.when == "call" or outcome == "error"):
                lines.append((label, "PASS" if outcome in ("passed", "xpassed") else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for label, verdict in sorted(set(lines)):
            terminalreporter.write_line(f"{verdict}  {label}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    label = getattr(item.function, "criterion_label", None)
    if label:
        outcome.get_result().criterion_label = label
