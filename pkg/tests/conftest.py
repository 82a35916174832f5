import re

import pytest

from fairalloc.distributions import Discrete, Exponential
from fairalloc.instance import Instance, Mode

VILLAGE_A = Discrete(((0, 0.6), (2, 0.4)))
VILLAGE_B = Discrete(((0, 0.3), (3, 0.7)))


@pytest.fixture
def village():
    return Instance.of([VILLAGE_A, VILLAGE_B], 2, Mode.INTEGER, ["A", "B"])


@pytest.fixture
def village_frac(village):
    return village.with_mode(Mode.FRACTIONAL)


@pytest.fixture
def report_line(request):
    """Extra line shown under the acceptance summary."""
    notes = request.config.__dict__.setdefault("_acceptance_notes", [])
    return notes.append


@pytest.fixture
def two_exp():
    return Instance.of([Exponential(1.0), Exponential(2.0)], 3.0)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", nodeid)
            if m and rep.when == "call":
                lines.append((int(m.group(1)), m.group(2), "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for num, name, status in sorted(lines):
            terminalreporter.write_line(f"criterion {num:2d} [{status}] {name}")
    for note in getattr(terminalreporter.config, "_acceptance_notes", []):
        terminalreporter.write_line(f"  {note}")
