import numpy as np
import pytest

from cellload.loadmodel import NetworkScenario
from cellload.scenario import ScenarioParams, generate_scenario


def bisect(func, lo, hi, tol=1e-15, max_iter=200):
    """Plain bisection for a sign change of ``func`` on ``[lo, hi]``."""
    flo = func(lo)
    assert flo * func(hi) < 0, "no sign change on the bracket"
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = func(mid)
        if fmid == 0 or hi - lo < tol:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def symmetric_pair(rate=1e6):
    """Two BSs, one TP each, own gain 1, cross gain 0.1, noise 0.1, R*B = 1 MHz."""
    scenario = NetworkScenario(
        power=[1.0, 1.0],
        gain=[[1.0, 0.1], [0.1, 1.0]],
        assignment=[0, 1],
        resources_hz=1e6,
        noise_power=0.1,
    )
    return scenario, np.array([rate, rate])


def single_cell():
    """One BS, one TP with SNR 15, so log2(1 + SNR) = 4 bit/s/Hz."""
    return NetworkScenario(power=[1.0], gain=[[1.0]], assignment=[0],
                           resources_hz=1e6, noise_power=1.0 / 15.0)


@pytest.fixture
def symmetric():
    return symmetric_pair()


@pytest.fixture
def cell():
    return single_cell()


SMALL_PARAMS = ScenarioParams(num_bs=4, num_tp=12, rate_min=1e6, rate_max=4e6, seed=3)


@pytest.fixture(scope="session")
def small_params():
    return SMALL_PARAMS


@pytest.fixture(scope="session")
def small_scenario():
    return generate_scenario(SMALL_PARAMS)


@pytest.fixture(scope="session")
def default_scenario():
    params = ScenarioParams(seed=11)
    return params, generate_scenario(params)


ACCEPTANCE_LINES = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
