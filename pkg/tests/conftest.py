import numpy as np
import pytest

from loschmidt import hamiltonians as hm
from loschmidt.states import coherent

# pass/fail lines for the acceptance criteria, filled by test_acceptance
ACCEPTANCE = {}


def record(key, passed, detail):
    ACCEPTANCE[key] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ho_pair():
    return hm.pair_from_reference(hm.harmonic(1.0), hm.squeeze_perturbation(0.1, 1.0))


@pytest.fixture
def inv_pair():
    return hm.pair_from_reference(hm.inverted(1.0), hm.dilation_perturbation(0.1, 1.0))


@pytest.fixture
def origin_state():
    return coherent([0.0, 0.0])


def random_quadratic(rng, L=1, scale=1.0, linear=True):
    n = 2 * L
    C = rng.standard_normal((n, n))
    a = rng.standard_normal(n) if linear else np.zeros(n)
    return hm.QuadraticHamiltonian(scale * (C + C.T) / 2, scale * a)
