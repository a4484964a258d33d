"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import pytest

from htallee.model import NondimParams

# acceptance outcomes recorded by tests/test_acceptance.py, in run order
ACCEPTANCE: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.append((name, bool(ok), detail))
    print(f"[acceptance] {'PASS' if ok else 'FAIL'} {name}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")


# fixture parameter sets used throughout the suite
FIG04 = NondimParams(0.2, 0.1, 0.35, 0.1)
FIG07 = NondimParams(0.0365, 0.1, 0.21, 0.0123)
FIG06A = NondimParams(0.0365, 0.1, 0.21, 0.121)
FIG08A = NondimParams(0.0365, 0.1, 0.21, 0.16)
FIG08 = NondimParams(0.0365, 0.1, 0.21, 0.1)


@pytest.fixture
def fig06a():
    return FIG06A


@pytest.fixture
def fig08a():
    return FIG08A
