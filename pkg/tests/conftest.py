"""Shared fixtures plus the per-criterion acceptance summary."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gradarg.corpus import load_corpus

ACCEPTANCE_CRITERIA = {
    "a01": "frailty activation example strengths (incl. runtime)",
    "a02": "base-score adjustment example strengths and decision flip",
    "a03": "full scenario-2 option strengths",
    "a04": "distribution table counts and percentages",
    "a05": "relation attribution table (sampled Shapley)",
    "a06": "sensitivity sweep qualitative trends",
    "a07": "semantics property suite",
    "a08": "edit discrimination statistical checks",
    "a09": "classifier totality and branch fidelity",
    "a10": "format round-trip and corpus golden files",
    "a11": "session replay determinism",
    "a12": "workbench end-to-end flow (frontend suite)",
}


@pytest.fixture(scope="session")
def scenario1():
    return load_corpus("frailty_scenario1")


@pytest.fixture(scope="session")
def scenario2():
    return load_corpus("frailty_scenario2")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[str, bool] = {}
    for status, ok in (("passed", True), ("failed", False), ("error", False)):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            for key in ACCEPTANCE_CRITERIA:
                if f"test_{key}" in name:
                    outcomes[key] = outcomes.get(key, True) and ok
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for key, description in ACCEPTANCE_CRITERIA.items():
        if key in outcomes:
            verdict = "PASS" if outcomes[key] else "FAIL"
            terminalreporter.write_line(f"{verdict}  {key}: {description}")
