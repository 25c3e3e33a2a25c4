import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blockrbf import _backend
from blockrbf.kernels import Family, KernelSpec, phi_of_t
from blockrbf.spatial import PointIndex
from blockrbf.sparse import (CooMatrix, assemble_submatrix, coo_gram_block, coo_matvec,
                             coo_transpose_matvec, dump_text)
from conftest import Q


@pytest.fixture
def q():
    return CooMatrix.from_dense(Q)


def test_q_matvec(q):
    assert coo_matvec(q, np.ones(5)).tolist() == [7, 18, 12, 10, 5]


def test_q_transpose_matvec(q):
    assert coo_transpose_matvec(q, np.ones(5)).tolist() == [14, 8, 11, 11, 8]


def test_q_density(q):
    assert q.nnz == 12
    assert 100 * q.density() == 48.0


def test_q_gram_first_two_columns(backend):
    cols = CooMatrix.from_dense(Q[:, :2])
    assert coo_gram_block(cols, cols).tolist() == [[98, 18], [18, 30]]


def test_gram_single_column(backend):
    a = CooMatrix.from_dense([[0.25], [1.0], [0.25]])
    assert coo_gram_block(a, a).tolist() == [[1.125]]


def test_gram_disjoint_rows(backend):
    left = CooMatrix.from_arrays([0, 1], [0, 0], [1.0, 2.0], (4, 1))
    right = CooMatrix.from_arrays([2, 3], [0, 1], [3.0, 4.0], (4, 2))
    assert coo_gram_block(left, right).tolist() == [[0.0, 0.0]]


def test_gram_row_mismatch():
    with pytest.raises(ValueError):
        coo_gram_block(CooMatrix.from_dense(np.ones((2, 1))), CooMatrix.from_dense(np.ones((3, 1))))


def test_trivial_matvecs(q):
    assert not coo_matvec(q, np.zeros(5)).any()
    assert not coo_transpose_matvec(q, np.zeros(5)).any()
    empty = CooMatrix.from_arrays([], [], [], (3, 2))
    assert coo_matvec(empty, [1.0, 2.0]).tolist() == [0, 0, 0]
    one = CooMatrix.from_arrays([0], [0], [1.5], (1, 1))
    assert coo_transpose_matvec(one, [2.0]).tolist() == [3.0]
    with pytest.raises(ValueError):
        coo_matvec(q, np.ones(4))
    with pytest.raises(ValueError):
        coo_transpose_matvec(q, np.ones(6))


def test_invariants_enforced():
    with pytest.raises(ValueError, match="nonzero"):
        CooMatrix.from_arrays([0], [0], [0.0], (1, 1))
    with pytest.raises(ValueError, match="range"):
        CooMatrix.from_arrays([1], [0], [1.0], (1, 1))
    with pytest.raises(ValueError, match="duplicate"):
        CooMatrix.from_arrays([0, 0], [1, 1], [1.0, 2.0], (1, 2))
    with pytest.raises(ValueError):
        CooMatrix.from_arrays([0], [0, 1], [1.0], (1, 2))


def test_line_assembly(backend):
    idx = PointIndex([[0.0], [0.5], [1.0]])
    a = assemble_submatrix(idx, [[0.5]], KernelSpec("wendland-3-0", 1.0))
    assert list(zip(a.row.tolist(), a.col.tolist(), a.data.tolist())) == \
        [(0, 0, 0.25), (1, 0, 1.0), (2, 0, 0.25)]


def test_far_refs_give_empty_block(backend):
    idx = PointIndex([[0.0, 0.0], [0.1, 0.0]])
    a = assemble_submatrix(idx, [[5.0, 5.0], [-5.0, 0.0]], KernelSpec("wendland-3-3", 1.0))
    assert a.nnz == 0 and a.shape == (2, 2)


def test_dump_text(q):
    buf = io.StringIO()
    dump_text(q, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 12
    assert lines[0] == "0 0 1.0"


def brute_design(points, refs, family, alpha):
    """Dense design matrix computed directly from pairwise distances."""
    d2 = np.zeros((points.shape[0], refs.shape[0]))
    for k in range(points.shape[1]):
        diff = points[:, k, None] - refs[None, :, k]
        d2 = d2 + diff * diff
    return phi_of_t(family.code, alpha * np.sqrt(d2))


@st.composite
def instances(draw):
    dim = draw(st.integers(1, 3))
    n = draw(st.integers(1, 500))
    m = draw(st.integers(1, 50))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    pts = rng.random((n, dim))
    refs = rng.random((m, dim)) * 1.2 - 0.1
    alpha = draw(st.floats(0.3, 20.0))
    family = draw(st.sampled_from(list(Family)))
    return pts, refs, family, alpha


@given(instances())
def test_assembly_equals_brute_force(inst):
    pts, refs, family, alpha = inst
    dense = brute_design(pts, refs, family, alpha)
    c, r = np.nonzero(dense.T)
    for name in ("python", "compiled"):
        if name == "compiled" and not _backend.compiled_available():
            continue
        with _backend.use_backend(name):
            a = assemble_submatrix(PointIndex(pts), refs, KernelSpec(family, alpha))
        # exact: same triplets, (col, row) order, no stored zeros
        assert a.col.tolist() == c.tolist()
        assert a.row.tolist() == r.tolist()
        assert np.array_equal(a.data, dense[r, c])
        assert a.nbytes == 16 * a.nnz


@given(instances(), st.data())
def test_gram_transpose_symmetry_and_matvec(inst, data):
    pts, refs, family, alpha = inst
    idx = PointIndex(pts)
    kern = KernelSpec(family, alpha)
    split = data.draw(st.integers(0, refs.shape[0]))
    if split in (0, refs.shape[0]):
        left = right = assemble_submatrix(idx, refs, kern)
    else:
        left = assemble_submatrix(idx, refs[:split], kern)
        right = assemble_submatrix(idx, refs[split:], kern)
    assert np.array_equal(coo_gram_block(left, right).T, coo_gram_block(right, left))
    dl, dr = left.toarray(), right.toarray()
    np.testing.assert_allclose(coo_gram_block(left, right), dl.T @ dr, rtol=1e-12, atol=1e-12)
    x = np.linspace(-1, 1, left.n_cols)
    expect = dl @ x
    scale = max(np.abs(dl).sum(axis=1).max(initial=0.0), 1e-300)
    assert np.abs(coo_matvec(left, x) - expect).max(initial=0.0) <= 1e-12 * scale
