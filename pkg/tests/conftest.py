from __future__ import annotations

import math

import numpy as np
import pytest

from capsobolev.caps import CapAverageContext
from capsobolev.weights import Weight

# (name, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def record(name: str, passed: bool, detail: str) -> bool:
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append((name, passed, detail))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance")
    for name, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def uniform():
    """rho = 1 on [0, pi]: the classical uniform cap average."""
    return Weight.constant()


@pytest.fixture(scope="session")
def uniform_ctx(uniform):
    return CapAverageContext(3, uniform)


@pytest.fixture(scope="session")
def indicator():
    return Weight.indicator(math.pi, math.pi / 4, math.pi / 2)


@pytest.fixture(scope="session")
def sample_weights():
    return {
        "constant": Weight.constant(),
        "constant-short": Weight.constant(2.0, 0.5, 1.5),
        "indicator": Weight.indicator(2.5, 0.5, 1.5),
        "power": Weight.power(2.5, 1.0),
        "power-frac": Weight.power(math.pi, 0.5),
        "table": Weight.from_table(3.0, [(0.0, 0.0), (1.0, 2.0), (2.0, 0.5), (3.0, 1.0)]),
    }
