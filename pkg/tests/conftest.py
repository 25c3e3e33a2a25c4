import numpy as np
import pytest
from hypothesis import settings

from blockrbf import _backend
from blockrbf.data import center_cloud, synthetic_cloud, uniform_grid_refs

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

BACKENDS = ["python"] + (["compiled"] if _backend.compiled_available() else [])

# Acceptance outcomes, filled in by tests/test_acceptance.py.
ACCEPTANCE = {}

# The matrix used as the worked COO example.
Q = np.array([
    [1, 0, 6, 0, 0],
    [9, 2, 0, 7, 0],
    [0, 1, 3, 0, 8],
    [4, 0, 2, 4, 0],
    [0, 5, 0, 0, 0],
], dtype=float)


@pytest.fixture(params=BACKENDS)
def backend(request):
    with _backend.use_backend(request.param):
        yield request.param


def synthetic_setup(count=1089, grid=81):
    """Centred Halton/Franke cloud and a boundary-inclusive grid in the centred frame."""
    raw = synthetic_cloud(count)
    refs = uniform_grid_refs(raw.aabb(), grid)
    cloud = center_cloud(raw)
    return cloud, np.ascontiguousarray(refs - cloud.offset)


@pytest.fixture(scope="session")
def synthetic():
    return synthetic_setup()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, text = ACCEPTANCE[n]
        terminalreporter.write_line(f"{status} criterion {n}: {text}")
