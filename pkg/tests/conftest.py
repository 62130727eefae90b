import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    """Seeded generator; RADWASS_SEED overrides the default seed."""
    return np.random.default_rng(int(os.environ.get("RADWASS_SEED", "20240601")))


# one summary line per acceptance criterion -----------------------------------

_CRITERIA: dict[str, tuple[str, str]] = {}


def _criterion_label(nodeid: str):
    name = nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" not in nodeid or not name.startswith("test_criterion_"):
        return None
    num, _, title = name[len("test_criterion_"):].partition("_")
    return int(num), title.replace("_", " ")


def pytest_runtest_logreport(report):
    label = _criterion_label(report.nodeid)
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        reason = ""
        if report.failed:
            text = str(report.longrepr.reprcrash.message) if hasattr(report.longrepr, "reprcrash") else str(report.longrepr)
            reason = text.splitlines()[0] if text else ""
        _CRITERIA[report.nodeid] = (label, "PASS" if report.passed else "FAIL", reason)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), verdict, reason in sorted(_CRITERIA.values()):
        line = f"criterion {num:2d} {verdict}  {title}"
        if reason:
            line += f"  ({reason})"
        terminalreporter.write_line(line)
