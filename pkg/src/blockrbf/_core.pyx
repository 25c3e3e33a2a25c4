# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled hot kernels: kd-tree walk, sub-matrix assembly, Gram merge join,
long double Cholesky. Operation order matches ``_fallback.py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sqrtl, isfinite
from libc.stdint cimport int32_t, int64_t
from libc.string cimport memcpy
from libcpp.vector cimport vector

from ._types import ACCUM_DTYPE, TRIPLET_DTYPE, PivotError

cnp.import_array()

cdef extern from *:
    """
    #include <algorithm>
    #include <cstdint>
    #include <vector>
    struct brbf_triplet { int32_t row; int32_t col; double data; };
    struct brbf_hit { int64_t idx; double dist; };
    // Stable counting sort on one key. Running it on col and then on row
    // yields (row, col) order; the col pass is skipped when the input is
    // already column-ordered, as assembly output is.
    static void brbf_count_pass(brbf_triplet* p, brbf_triplet* tmp, Py_ssize_t n, bool by_row) {
        int32_t top = 0;
        for (Py_ssize_t s = 0; s < n; ++s) {
            int32_t key = by_row ? p[s].row : p[s].col;
            if (key > top) top = key;
        }
        std::vector<Py_ssize_t> pos((size_t) top + 2, 0);
        for (Py_ssize_t s = 0; s < n; ++s) pos[(by_row ? p[s].row : p[s].col) + 1]++;
        for (size_t k = 1; k < pos.size(); ++k) pos[k] += pos[k - 1];
        for (Py_ssize_t s = 0; s < n; ++s) tmp[pos[by_row ? p[s].row : p[s].col]++] = p[s];
        std::copy(tmp, tmp + n, p);
    }
    static void brbf_sort_rows(brbf_triplet* p, Py_ssize_t n) {
        std::vector<brbf_triplet> tmp((size_t) n);
        bool col_major = true;
        for (Py_ssize_t s = 1; s < n && col_major; ++s)
            col_major = p[s - 1].col < p[s].col ||
                        (p[s - 1].col == p[s].col && p[s - 1].row <= p[s].row);
        if (!col_major) brbf_count_pass(p, tmp.data(), n, false);
        brbf_count_pass(p, tmp.data(), n, true);
    }
    static void brbf_sort_hits(std::vector<brbf_hit>& v) {
        std::sort(v.begin(), v.end(), [](const brbf_hit& a, const brbf_hit& b) {
            return a.idx < b.idx;
        });
    }
    """
    ctypedef struct brbf_triplet:
        int32_t row
        int32_t col
        double data
    ctypedef struct brbf_hit:
        int64_t idx
        double dist
    void brbf_sort_rows(brbf_triplet* p, Py_ssize_t n) nogil
    void brbf_sort_hits(vector[brbf_hit]& v) nogil


cdef struct Tree:
    const double* pts
    const int64_t* perm
    const int64_t* start
    const int64_t* end
    const int64_t* left
    const int64_t* right
    const double* lo
    const double* hi
    Py_ssize_t dim


cdef Tree _tree(index) except *:
    cdef Tree t
    cdef const double[:, ::1] pts = index.tree_points
    cdef const int64_t[::1] perm = index.perm
    cdef const int64_t[::1] start = index.start
    cdef const int64_t[::1] end = index.end
    cdef const int64_t[::1] left = index.left
    cdef const int64_t[::1] right = index.right
    cdef const double[:, ::1] lo = index.lo
    cdef const double[:, ::1] hi = index.hi
    t.pts = &pts[0, 0]
    t.perm = &perm[0]
    t.start = &start[0]
    t.end = &end[0]
    t.left = &left[0]
    t.right = &right[0]
    t.lo = &lo[0, 0]
    t.hi = &hi[0, 0]
    t.dim = pts.shape[1]
    return t


cdef void _query(const Tree* t, const double* c, double radius,
                 vector[int64_t]& stack, vector[brbf_hit]& hits) noexcept nogil:
    cdef Py_ssize_t k, s, dim = t.dim
    cdef int64_t node
    cdef double d2, g, g2, dx, r
    cdef brbf_hit h
    hits.clear()
    stack.clear()
    stack.push_back(0)
    while stack.size():
        node = stack.back()
        stack.pop_back()
        d2 = 0.0
        for k in range(dim):
            g = t.lo[node * dim + k] - c[k]
            g2 = c[k] - t.hi[node * dim + k]
            if g2 > g:
                g = g2
            if g < 0.0:
                g = 0.0
            d2 = d2 + g * g
        if not sqrt(d2) < radius:
            continue
        if t.left[node] < 0:
            for s in range(t.start[node], t.end[node]):
                d2 = 0.0
                for k in range(dim):
                    dx = t.pts[s * dim + k] - c[k]
                    d2 = d2 + dx * dx
                r = sqrt(d2)
                if r < radius:
                    h.idx = t.perm[s]
                    h.dist = r
                    hits.push_back(h)
        else:
            stack.push_back(t.right[node])
            stack.push_back(t.left[node])
    brbf_sort_hits(hits)


cdef inline double _phi(int code, double t) noexcept nogil:
    cdef double u, u2, u4, u8
    if not t < 1.0:
        return 0.0
    u = 1.0 - t
    if code == 0:
        return u * u
    u2 = u * u
    u4 = u2 * u2
    if code == 1:
        return u4 * (4.0 * t + 1.0)
    u8 = u4 * u4
    return u8 * (((32.0 * t + 25.0) * t + 8.0) * t + 1.0)


def radius_query(index, const double[::1] center, double radius):
    cdef Tree t = _tree(index)
    cdef vector[int64_t] stack
    cdef vector[brbf_hit] hits
    cdef Py_ssize_t i, n
    with nogil:
        _query(&t, &center[0], radius, stack, hits)
    n = hits.size()
    idx = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    cdef int64_t[::1] iv = idx
    cdef double[::1] dv = dist
    for i in range(n):
        iv[i] = hits[i].idx
        dv[i] = hits[i].dist
    return idx, dist


def assemble(index, const double[:, ::1] refs, int code, double alpha, double radius):
    cdef Tree t = _tree(index)
    cdef vector[int64_t] stack
    cdef vector[brbf_hit] hits
    cdef vector[brbf_triplet] out
    cdef brbf_triplet tr
    cdef Py_ssize_t j, i, m = refs.shape[0]
    cdef double v
    if refs.shape[1] != t.dim:
        raise ValueError("reference points and index differ in dimension")
    with nogil:
        for j in range(m):
            _query(&t, &refs[j, 0], radius, stack, hits)
            for i in range(<Py_ssize_t> hits.size()):
                v = _phi(code, alpha * hits[i].dist)
                if v != 0.0:
                    tr.row = <int32_t> hits[i].idx
                    tr.col = <int32_t> j
                    tr.data = v
                    out.push_back(tr)
    arr = np.empty(out.size(), dtype=TRIPLET_DTYPE)
    if out.size():
        memcpy(cnp.PyArray_DATA(arr), out.data(), out.size() * sizeof(brbf_triplet))
    return arr


cdef brbf_triplet* _trip_ptr(cnp.ndarray trip) except NULL:
    if trip.dtype != TRIPLET_DTYPE or not trip.flags.c_contiguous:
        raise TypeError("expected a contiguous triplet array")
    if trip.shape[0] == 0:
        return <brbf_triplet*> 1  # never dereferenced
    return <brbf_triplet*> cnp.PyArray_DATA(trip)


def sort_rows(cnp.ndarray trip):
    cdef brbf_triplet* p = _trip_ptr(trip)
    cdef Py_ssize_t n = trip.shape[0]
    if n:
        with nogil:
            brbf_sort_rows(p, n)


def gram_rows(long double[:, :] out, cnp.ndarray left, cnp.ndarray right, bint upper):
    cdef brbf_triplet* L = _trip_ptr(left)
    cdef brbf_triplet* R = _trip_ptr(right)
    cdef Py_ssize_t nl = left.shape[0], nr = right.shape[0]
    cdef Py_ssize_t i = 0, j = 0, iend, jend, a, b
    cdef int32_t rl, rr, ci, cj
    cdef long double v
    with nogil:
        while i < nl and j < nr:
            rl = L[i].row
            rr = R[j].row
            if rl < rr:
                i += 1
            elif rr < rl:
                j += 1
            else:
                iend = i
                while iend < nl and L[iend].row == rl:
                    iend += 1
                jend = j
                while jend < nr and R[jend].row == rr:
                    jend += 1
                for a in range(i, iend):
                    ci = L[a].col
                    v = <long double> L[a].data
                    for b in range(j, jend):
                        cj = R[b].col
                        if upper and cj < ci:
                            continue
                        out[ci, cj] = out[ci, cj] + v * <long double> R[b].data
                i = iend
                j = jend


def t_dot(cnp.ndarray trip, const double[:, :] Y, long double[:, :] out):
    cdef brbf_triplet* p = _trip_ptr(trip)
    cdef Py_ssize_t n = trip.shape[0], q = Y.shape[1], s, k
    cdef int32_t r, c
    cdef long double v
    with nogil:
        for s in range(n):
            r = p[s].row
            c = p[s].col
            v = <long double> p[s].data
            for k in range(q):
                out[c, k] = out[c, k] + v * <long double> Y[r, k]


def cholesky(long double[:, :] A, double tol):
    """In-place Cholesky; the factor overwrites the lower triangle of ``A``."""
    cdef Py_ssize_t n = A.shape[0], i, j, k
    cdef long double acc, d, piv
    cdef long double ltol = tol
    for j in range(n):
        with nogil:
            acc = 0.0
            for k in range(j):
                acc = acc + A[j, k] * A[j, k]
            d = A[j, j] - acc
        if not (isfinite(d) and d > ltol * A[j, j] and d > 0):
            raise PivotError(j, float(d))
        with nogil:
            piv = sqrtl(d)
            A[j, j] = piv
            for i in range(j + 1, n):
                acc = 0.0
                for k in range(j):
                    acc = acc + A[i, k] * A[j, k]
                A[i, j] = (A[i, j] - acc) / piv


def cho_solve(const long double[:, :] L, const long double[:] b):
    cdef Py_ssize_t n = L.shape[0], i, k
    ynp = np.zeros(n, dtype=ACCUM_DTYPE)
    xnp = np.zeros(n, dtype=ACCUM_DTYPE)
    cdef long double[::1] y = ynp
    cdef long double[::1] x = xnp
    cdef long double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(i):
                acc = acc + L[i, k] * y[k]
            y[i] = (b[i] - acc) / L[i, i]
        for i in range(n - 1, -1, -1):
            acc = 0.0
            for k in range(i + 1, n):
                acc = acc + L[k, i] * x[k]
            x[i] = (y[i] - acc) / L[i, i]
    return xnp
