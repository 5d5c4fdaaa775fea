"""Shared fixtures and the acceptance-criteria summary section."""

import pytest

from pvdiag.arraysim import ArrayConfig, FaultClass, FaultSpec, array_iv_curve
from pvdiag.pvmodule import STC, shell_sp70


@pytest.fixture(scope="session")
def module():
    return shell_sp70()


@pytest.fixture(scope="session")
def blocking_cfg():
    return ArrayConfig(blocking_diodes=True)


@pytest.fixture(scope="session")
def nonblocking_cfg():
    return ArrayConfig(blocking_diodes=False)


@pytest.fixture(scope="session")
def healthy_fault():
    return FaultSpec(fault_class=FaultClass.Healthy)


@pytest.fixture(scope="session")
def healthy_curve_stc(blocking_cfg, healthy_fault):
    return array_iv_curve(blocking_cfg, healthy_fault, STC)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Queue one pass/fail line for the terminal summary."""
    word = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(f"criterion {number:2d}: {word}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
