from __future__ import annotations

from pathlib import Path

import pytest

from psworld import corpus_path, load_model, parse_model

FIXTURES = Path(__file__).parent / "fixtures"
CONTEXTS = ["OpsC_1", "OpsC_2"]
DESIRED = ["oc_1_1", "oc_1_2", "oc_1_3"]

MAINTENANCE_PORT = """
entity maintenance_port kind external {
  function log domain {diagnostic_report} codomain {service_ticket}
}
interaction i_maint: traffic_light -> maintenance_port flow diagnostic_report via service_bus
"""


def corpus_text() -> str:
    return corpus_path().read_text(encoding="utf-8")


@pytest.fixture
def corpus():
    return load_model(corpus_path())


@pytest.fixture
def maintenance():
    """Corpus plus a light->maintenance_port interaction nothing ever drives."""
    return parse_model(corpus_text() + MAINTENANCE_PORT, "traffic+maintenance.psw")


@pytest.fixture
def fixture_path():
    return lambda name: FIXTURES / name


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    outcome: dict[str, str] = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            name = getattr(rep, "nodeid", "").split("::")[-1]
            if "test_acceptance.py" in getattr(rep, "nodeid", "") and name.startswith("test_criterion_"):
                if outcome.get(name) != "FAIL":
                    outcome[name] = "PASS" if key == "passed" else "FAIL"
    if not outcome:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(outcome):
        number = int(name.split("_")[2])
        title = " ".join(name.split("_")[3:])
        terminalreporter.write_line(f"criterion {number:>2}: {outcome[name]}  {title}")
