"""The compiled core and the numpy fallback must agree bit for bit."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blockrbf import _backend, _fallback
from blockrbf._types import ACCUM_DTYPE, PivotError
from blockrbf.data import PointCloud
from blockrbf.kernels import Family, KernelSpec
from blockrbf.solver import PIVOT_TOL, fit
from blockrbf.spatial import PointIndex

pytestmark = pytest.mark.skipif(not _backend.compiled_available(),
                                reason="compiled core not built")

core = _backend._core


def problem(seed, n, m, dim):
    rng = np.random.default_rng(seed)
    return rng.random((n, dim)), np.ascontiguousarray(rng.random((m, dim)))


seeds = st.integers(0, 2 ** 32 - 1)


@given(seeds, st.integers(1, 400), st.integers(1, 40), st.integers(1, 3),
       st.sampled_from(list(Family)), st.floats(0.5, 15.0))
def test_assembly_and_sort(seed, n, m, dim, family, alpha):
    pts, refs = problem(seed, n, m, dim)
    idx = PointIndex(pts)
    args = (idx, refs, family.code, alpha, 1.0 / alpha)
    a, b = core.assemble(*args), _fallback.assemble(*args)
    assert np.array_equal(a, b)
    core.sort_rows(a)
    _fallback.sort_rows(b)
    assert np.array_equal(a, b)
    assert np.all(np.diff(a["row"].astype(np.int64) * m + a["col"]) > 0)


@given(seeds, st.integers(1, 300), st.integers(2, 30), st.booleans())
def test_gram_and_tdot(seed, n, m, upper):
    pts, refs = problem(seed, n, m, 2)
    idx = PointIndex(pts)
    trip = core.assemble(idx, refs, 3, 4.0, 0.25)
    core.sort_rows(trip)
    split = m // 2
    left, right = trip[trip["col"] < split].copy(), trip[trip["col"] >= split].copy()
    right["col"] -= split
    for lhs, rhs in ((trip, trip), (left, right)):
        outs = []
        for impl in (core, _fallback):
            out = np.zeros((m, m), dtype=ACCUM_DTYPE)
            impl.gram_rows(out, lhs, rhs, upper)
            outs.append(out)
        assert np.array_equal(*outs)
    y = np.random.default_rng(seed).standard_normal((n, 3))
    outs = []
    for impl in (core, _fallback):
        out = np.zeros((m, 3), dtype=ACCUM_DTYPE)
        impl.t_dot(trip, y, out)
        outs.append(out)
    assert np.array_equal(*outs)


@given(seeds, st.integers(1, 40))
def test_cholesky_and_solve(seed, n):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n + 3, n))
    spd = (g.T @ g + 1e-3 * np.eye(n)).astype(ACCUM_DTYPE)
    b = rng.standard_normal(n).astype(ACCUM_DTYPE)
    la, lb = spd.copy(), spd.copy()
    core.cholesky(la, PIVOT_TOL)
    _fallback.cholesky(lb, PIVOT_TOL)
    assert np.array_equal(np.tril(la), np.tril(lb))
    xa, xb = core.cho_solve(la, b), _fallback.cho_solve(lb, b)
    assert np.array_equal(xa, xb)
    np.testing.assert_allclose((spd @ xa).astype(float), b.astype(float), rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("impl", [core, _fallback], ids=["compiled", "python"])
def test_cholesky_breakdown_reports_pivot(impl):
    a = np.array([[1, 2, 0], [2, 4, 0], [0, 0, 1]], dtype=ACCUM_DTYPE)
    with pytest.raises(PivotError) as err:
        impl.cholesky(a, PIVOT_TOL)
    assert err.value.index == 1


@given(seeds, st.booleans(), st.integers(1, 25))
def test_full_fit_identical(seed, poly, width):
    pts, refs = problem(seed, 250, 25, 2)
    cloud = PointCloud(pts, np.cos(4 * pts[:, 0]) * pts[:, 1])
    kern = KernelSpec("wendland-3-1", 3.0)
    with _backend.use_backend("compiled"):
        a = fit(cloud, refs, kern, poly=poly, block_size=width)
    with _backend.use_backend("python"):
        b = fit(cloud, refs, kern, poly=poly, block_size=width)
    assert a.info.backend == "compiled" and b.info.backend == "python"
    assert np.array_equal(a.weights, b.weights)
    if poly:
        assert np.array_equal(a.poly_coeffs[0], b.poly_coeffs[0])


def test_switching():
    before = _backend.name()
    with _backend.use_backend("python"):
        assert _backend.name() == "python"
    assert _backend.name() == before
    with pytest.raises(ValueError):
        _backend.set_backend("fortran")


def test_environment_forces_fallback():
    env = dict(os.environ, BLOCKRBF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from blockrbf import _backend; print(_backend.name())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
