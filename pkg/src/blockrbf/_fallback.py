"""Pure numpy implementations of the hot kernels.

Same signatures and the same floating-point operation order as ``_core.pyx``;
only the looping strategy differs.
"""
from __future__ import annotations

import numpy as np

from ._types import ACCUM_DTYPE, TRIPLET_DTYPE, PivotError, empty_triplets
from .kernels import phi_of_t

# Upper bound on expanded (left, right) products held at once by gram_rows.
_PAIR_CHUNK = 1 << 21


def _ranges(starts, counts):
    """Concatenation of ``arange(s, s + n)`` over paired starts and counts."""
    counts = np.asarray(counts, dtype=np.int64)
    first = np.cumsum(counts) - counts
    return np.arange(int(counts.sum()), dtype=np.int64) - np.repeat(first, counts) \
        + np.repeat(np.asarray(starts, dtype=np.int64), counts)


def _candidate_slots(index, c, radius):
    """Tree-order positions of every point in a leaf the query ball touches."""
    frontier = np.zeros(1, dtype=np.int64)
    starts, ends = [], []
    while frontier.size:
        gap = np.maximum(np.maximum(index.lo[frontier] - c, c - index.hi[frontier]), 0.0)
        d2 = gap[:, 0] * gap[:, 0]
        for k in range(1, gap.shape[1]):
            d2 = d2 + gap[:, k] * gap[:, k]
        frontier = frontier[np.sqrt(d2) < radius]
        is_leaf = index.left[frontier] < 0
        leaves = frontier[is_leaf]
        starts.append(index.start[leaves])
        ends.append(index.end[leaves])
        inner = frontier[~is_leaf]
        frontier = np.concatenate([index.left[inner], index.right[inner]])
    starts, ends = np.concatenate(starts), np.concatenate(ends)
    return _ranges(starts, ends - starts)


def _query(index, c, radius):
    slots = _candidate_slots(index, c, radius)
    diff = index.tree_points[slots] - c
    d2 = diff[:, 0] * diff[:, 0]
    for k in range(1, diff.shape[1]):
        d2 = d2 + diff[:, k] * diff[:, k]
    dist = np.sqrt(d2)
    keep = dist < radius
    idx = index.perm[slots[keep]]
    dist = dist[keep]
    order = np.argsort(idx, kind="stable")
    return idx[order], dist[order]


def radius_query(index, center, radius):
    return _query(index, center, radius)


def assemble(index, refs, code, alpha, radius):
    parts = []
    for j in range(refs.shape[0]):
        idx, dist = _query(index, refs[j], radius)
        val = phi_of_t(code, alpha * dist)
        nz = val != 0.0
        part = empty_triplets(int(nz.sum()))
        part["row"] = idx[nz]
        part["col"] = j
        part["data"] = val[nz]
        parts.append(part)
    if not parts:
        return empty_triplets()
    return np.concatenate(parts)


def sort_rows(trip):
    row, col = trip["row"], trip["col"]
    col_major = trip.size < 2 or bool(np.all(
        (col[1:] > col[:-1]) | ((col[1:] == col[:-1]) & (row[1:] >= row[:-1]))))
    # A stable sort on row alone keeps column order within each row.
    order = np.argsort(row, kind="stable") if col_major else np.lexsort((col, row))
    trip[:] = trip[order]


def _row_groups(rows):
    starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    counts = np.diff(np.r_[starts, rows.size])
    return rows[starts], starts, counts


def gram_rows(out, left, right, upper):
    if left.size == 0 or right.size == 0:
        return
    lrows, lstart, lcount = _row_groups(left["row"])
    rrows, rstart, rcount = _row_groups(right["row"])
    _, li, ri = np.intersect1d(lrows, rrows, assume_unique=True, return_indices=True)
    # expand every left entry of a shared row against that row's right entries
    lentry = _ranges(lstart[li], lcount[li])
    rep = np.repeat(rcount[ri], lcount[li])
    rbase = np.repeat(rstart[ri], lcount[li])
    lval = left["data"].astype(ACCUM_DTYPE)
    rval = right["data"].astype(ACCUM_DTYPE)
    total = np.cumsum(rep)
    lo = 0
    while lo < lentry.size:
        done = total[lo - 1] if lo else 0
        hi = max(lo + 1, int(np.searchsorted(total, done + _PAIR_CHUNK, side="right")))
        le, rp, rb = lentry[lo:hi], rep[lo:hi], rbase[lo:hi]
        pos = _ranges(rb, rp)
        lidx = np.repeat(le, rp)
        ci = left["col"][lidx]
        cj = right["col"][pos]
        prod = lval[lidx] * rval[pos]
        if upper:
            keep = cj >= ci
            ci, cj, prod = ci[keep], cj[keep], prod[keep]
        np.add.at(out, (ci, cj), prod)
        lo = hi


def t_dot(trip, Y, out):
    if trip.size == 0:
        return
    prod = trip["data"].astype(ACCUM_DTYPE)[:, None] * Y[trip["row"]].astype(ACCUM_DTYPE)
    np.add.at(out, trip["col"], prod)


def cholesky(A, tol):
    """In-place Cholesky; the factor overwrites the lower triangle of ``A``."""
    n = A.shape[0]
    for j in range(n):
        row = A[j, :j]
        d = A[j, j] - np.dot(row, row)
        if not (np.isfinite(d) and d > tol * A[j, j] and d > 0):
            raise PivotError(j, float(d))
        piv = np.sqrt(d)
        A[j, j] = piv
        if j + 1 < n:
            A[j + 1:, j] = (A[j + 1:, j] - A[j + 1:, :j] @ row) / piv


def cho_solve(L, b):
    n = L.shape[0]
    y = np.zeros(n, dtype=ACCUM_DTYPE)
    for i in range(n):
        y[i] = (b[i] - np.dot(L[i, :i], y[:i])) / L[i, i]
    x = np.zeros(n, dtype=ACCUM_DTYPE)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - np.dot(L[i + 1:, i], x[i + 1:])) / L[i, i]
    return x
