import numpy as np
import pytest

from brownliq import kernels
from brownliq.configuration import ModelSpec
from brownliq.geometry import HalfCylinder

BACKENDS = ["python"] + (["cython"] if kernels.compiled is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def single_disc():
    return ModelSpec([0.1], [1.0], HalfCylinder(1.0))


def random_valid(spec, rng, attempts=10_000):
    """Random valid configuration by sequential insertion in a tall box."""
    from brownliq.sampler import initial_configuration

    return initial_configuration(spec, rng, attempts)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records one acceptance line for the summary."""

    def record(n, ok, detail):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((n, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
