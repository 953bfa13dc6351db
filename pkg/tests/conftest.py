import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# (number, title) -> (outcome, detail); filled by the acceptance tests
_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = dict(item.user_properties).get("detail", "")
        if rep.skipped:
            status = "SKIP"
            if isinstance(rep.longrepr, tuple):
                detail = rep.longrepr[2]
        else:
            status = "PASS" if rep.passed else "FAIL"
        _criteria[tuple(marker.args)] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (n, title), (status, detail) in sorted(_criteria.items()):
        line = f"[{status}] criterion {n}: {title}"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)
