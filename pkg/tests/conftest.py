import numpy as np
import pytest

from mbrh.broadening import BroadeningTransform, make_profile
from mbrh.rhsolver import SolverConfig, build_instance
from mbrh.spectral import ScatteringData, endpoint_from_boundary


@pytest.fixture(scope="session")
def box():
    return BroadeningTransform(make_profile({"type": "box", "lambda": 1.0}))


@pytest.fixture(scope="session")
def data(box):
    return endpoint_from_boundary(1.0, 1.0, box)


@pytest.fixture(scope="session")
def scat(data):
    return ScatteringData(data)


@pytest.fixture(scope="session")
def solved(scat, box):
    """A deformed solve at (t, x) = (1.5, 0.5) with 128 nodes per piece."""
    return build_instance(scat, box, 1.5, 0.5, SolverConfig(nodes_per_piece=128)).solve()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record ``(criterion, passed, detail)``; lines are printed in the summary."""

    def record(n: int, passed: bool, detail: str) -> None:
        line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[n] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
