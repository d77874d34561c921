import pathlib

import numpy as np
import pytest

from konus import BlackBox, Scenario

ROOT = pathlib.Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
DATA = pathlib.Path(__file__).resolve().parent / "data"

FAMILY_TIMES = (1.0, 1.25, 1.5, 1.75, 2.0)

# filled by test_acceptance, printed at the end of the run
ACCEPTANCE_LINES: list = []


def circle_utility() -> BlackBox:
    """q1^2 + q2^2: level sets are concave to the origin."""
    return BlackBox(lambda q: float(q @ q), lambda q: 2.0 * q, 2,
                    hess=lambda q: 2.0 * np.eye(2), label="circle")


def ces_utility(rho: float) -> BlackBox:
    """(q1^rho + q2^rho)^(1/rho), rho < 1, gradient only."""
    def f(q):
        return float(np.sum(q ** rho) ** (1.0 / rho))

    def g(q):
        return np.sum(q ** rho) ** (1.0 / rho - 1.0) * q ** (rho - 1.0)

    return BlackBox(f, g, 2, label=f"ces({rho})")


@pytest.fixture
def family_scenario() -> Scenario:
    return Scenario.cobb_douglas(FAMILY_TIMES, [(t, 1.0) for t in FAMILY_TIMES], [(1.0, 1.0)] * 5)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
