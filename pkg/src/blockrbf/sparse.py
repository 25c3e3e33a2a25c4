"""Coordinate-format sparse matrices and block-column assembly of the design matrix.

A :class:`CooMatrix` keeps its nonzeros as one packed array of
``(row, col, data)`` records (16 bytes each). ``row``, ``col`` and ``data``
are exposed as views into it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._types import ACCUM_DTYPE, TRIPLET_DTYPE, empty_triplets
from .kernels import KernelSpec
from .spatial import PointIndex


@dataclass(frozen=True, eq=False)
class CooMatrix:
    n_rows: int
    n_cols: int
    triplets: np.ndarray

    def __post_init__(self):
        t = self.triplets
        if t.dtype != TRIPLET_DTYPE or t.ndim != 1:
            raise TypeError("triplets must be a 1-D TRIPLET_DTYPE array")
        if not t.flags.c_contiguous:
            object.__setattr__(self, "triplets", np.ascontiguousarray(t))

    @classmethod
    def from_arrays(cls, row, col, data, shape) -> "CooMatrix":
        """Build from parallel arrays, checking the COO invariants."""
        row = np.asarray(row)
        col = np.asarray(col)
        data = np.asarray(data, dtype=np.float64)
        if not (row.shape == col.shape == data.shape) or row.ndim != 1:
            raise ValueError("row, col and data must be 1-D arrays of equal length")
        n_rows, n_cols = (int(s) for s in shape)
        if row.size:
            if row.min() < 0 or row.max() >= n_rows:
                raise ValueError("row index out of range")
            if col.min() < 0 or col.max() >= n_cols:
                raise ValueError("column index out of range")
        if not np.all(np.isfinite(data)) or np.any(data == 0.0):
            raise ValueError("stored values must be nonzero and finite")
        t = empty_triplets(row.size)
        t["row"], t["col"], t["data"] = row, col, data
        if row.size:
            key = np.sort(t["row"].astype(np.int64) * n_cols + t["col"])
            if np.any(key[1:] == key[:-1]):
                raise ValueError("duplicate (row, col) entry")
        return cls(n_rows, n_cols, t)

    @classmethod
    def from_dense(cls, a) -> "CooMatrix":
        a = np.asarray(a, dtype=np.float64)
        c, r = np.nonzero(a.T)  # column-major order
        return cls.from_arrays(r, c, a[r, c], a.shape)

    @property
    def row(self) -> np.ndarray:
        return self.triplets["row"]

    @property
    def col(self) -> np.ndarray:
        return self.triplets["col"]

    @property
    def data(self) -> np.ndarray:
        return self.triplets["data"]

    @property
    def nnz(self) -> int:
        return int(self.triplets.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nbytes(self) -> int:
        return int(self.triplets.nbytes)

    def density(self) -> float:
        cells = self.n_rows * self.n_cols
        return self.nnz / cells if cells else 0.0

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row, self.col] = self.data
        return out

    def row_sorted(self) -> np.ndarray:
        """Copy of the triplets in (row, col) order."""
        t = self.triplets.copy()
        _backend.impl.sort_rows(t)
        return t


def _check_len(vec, n, what):
    v = np.asarray(vec, dtype=np.float64)
    if v.shape != (n,):
        raise ValueError(f"{what} has shape {v.shape}, expected ({n},)")
    return v


def coo_matvec(m: CooMatrix, x) -> np.ndarray:
    """``y = M x`` accumulated triplet by triplet into a zeroed output."""
    x = _check_len(x, m.n_cols, "x")
    return np.bincount(m.row, weights=m.data * x[m.col], minlength=m.n_rows).astype(np.float64)


def coo_transpose_matvec(m: CooMatrix, y) -> np.ndarray:
    """``M^T y``, accumulated into column slots."""
    y = _check_len(y, m.n_rows, "y")
    return np.bincount(m.col, weights=m.data * y[m.row], minlength=m.n_cols).astype(np.float64)


def coo_gram_block(left: CooMatrix, right: CooMatrix, dtype=np.float64) -> np.ndarray:
    """Dense ``left^T right`` from the rows the two blocks share.

    Products are accumulated in extended precision and rounded to ``dtype``
    at the end.
    """
    if left.n_rows != right.n_rows:
        raise ValueError(f"row counts differ: {left.n_rows} != {right.n_rows}")
    out = np.zeros((left.n_cols, right.n_cols), dtype=ACCUM_DTYPE)
    _backend.impl.gram_rows(out, left.row_sorted(), right.row_sorted(), False)
    return out.astype(dtype)


def assemble_submatrix(points: PointIndex, refs, kernel: KernelSpec) -> CooMatrix:
    """Sub-matrix of the design matrix for one block of reference points.

    For every reference point (in order) the kd-tree is queried for data
    points within the support radius and one triplet ``(q, j, phi)`` is stored
    per hit with a nonzero kernel value. Column indices are local to the block;
    triplets come out sorted by (col, row).
    """
    refs = np.ascontiguousarray(refs, dtype=np.float64)
    if refs.ndim == 1:
        refs = refs.reshape(1, -1)
    if refs.shape[0] == 0:
        raise ValueError("a block needs at least one reference point")
    if refs.shape[1] != points.dim:
        raise ValueError(f"reference points have dimension {refs.shape[1]}, data has {points.dim}")
    trip = _backend.impl.assemble(points, refs, kernel.family.code, kernel.alpha,
                                  kernel.support_radius)
    return CooMatrix(len(points), refs.shape[0], trip)


def dump_text(m: CooMatrix, fh) -> None:
    """Debug dump, one ``row col value`` line per nonzero. Not a stable format."""
    for r, c, v in zip(m.row.tolist(), m.col.tolist(), m.data.tolist()):
        fh.write(f"{r} {c} {v!r}\n")
