import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import chain_scenario  # noqa: E402
from adhocsec.scenario import SendAction  # noqa: E402


@pytest.fixture
def chain3():
    sc = chain_scenario(3)
    sc.script.append(SendAction(1_000_000, 0, 2, b"meet at the river"))
    return sc


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, elapsed, budget = results[number]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{verdict} criterion {number}: {title} ({elapsed:.2f}s of {budget}s)")
