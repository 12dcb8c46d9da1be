import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
    max_examples=int(os.environ.get("HYPOTHESIS_MAX_EXAMPLES", "60")),
)
settings.load_profile("repo")

import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def report(number, ok, detail, elapsed=None, budget=None):
        timing = ""
        if elapsed is not None:
            timing = f" [{elapsed:.1f}s" + (f" / budget {budget:.0f}s]" if budget else "]")
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}{timing}"
        _ACCEPTANCE_LINES.append(line)
        print(line, flush=True)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
