import math

import numpy as np
import pytest

from remlab.dynamics import RateModel
from remlab.environment import Environment
from remlab.scales import ScaleSet, beta_c


@pytest.fixture
def small_env():
    return Environment(8, 1.2, seed=3)


@pytest.fixture
def small_model(small_env):
    return RateModel(small_env, eta=0.05)


@pytest.fixture
def desk_scales():
    eps = 0.4
    return ScaleSet.build(10, 1.5 * beta_c(eps), eps)


def flat_env(n: int) -> Environment:
    return Environment.from_energies(np.zeros(1 << n), beta=1.0)


_CRITERIA: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    _CRITERIA[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        passed, detail = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}")
