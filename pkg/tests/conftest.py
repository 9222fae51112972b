"""Shared fixtures and the acceptance summary printed at the end of the run."""

from __future__ import annotations

import pytest

from padic_morphogen.padic import GridGeometry
from padic_morphogen.turing import schnakenberg

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def fixture_geometry():
    return GridGeometry(2, 0, 3)


@pytest.fixture
def unstable_model():
    return schnakenberg(a=0.2, b=1.3, gamma=10.0, d=30.0)
