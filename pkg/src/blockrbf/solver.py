"""Block-wise least-squares fitting.

The ``M x M`` normal matrix ``B = A^T A`` is built from column blocks of the
design matrix ``A``. Only the diagonal and upper blocks ``B_kl = A_k^T A_l``
(``l >= k``) are computed, then mirrored. At most two sub-matrices are resident
at a time, so the working set is bounded by

    (M^2 + 2 * M_B * N) * prec        (dense bound)
    (M^2 + 2 * N_NZ) * prec           (sparse bound, N_NZ = max block nonzeros)

with ``M`` extended by the ``n + 1`` polynomial columns when linear
reproduction is on, plus the right-hand side. Gram entries, right-hand sides
and the factorisation are accumulated in extended precision (``long double``).
"""
from __future__ import annotations

import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _backend
from ._types import ACCUM_DTYPE, PivotError
from .data import PointCloud
from .kernels import Family, KernelSpec
from .spatial import PointIndex
from .sparse import CooMatrix, assemble_submatrix

log = logging.getLogger(__name__)

# Bytes per stored scalar of the normal system, and per COO triplet
# (int32 row + int32 col + float64 value).
SCALAR_BYTES = 16
DEFAULT_RAM_BUDGET = 2 * 1024 ** 3
PIVOT_TOL = 16 * float(np.finfo(ACCUM_DTYPE).eps)
RIDGE_STEPS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
MODEL_FORMAT = "blockrbf-model"
MODEL_FORMAT_VERSION = 1


class BudgetError(ValueError):
    pass


class SingularSystemError(ArithmeticError):
    def __init__(self, pivot: int, message: str):
        super().__init__(message)
        self.pivot = pivot


# ---------------------------------------------------------------------------
# block planning

@dataclass(frozen=True)
class BlockPlan:
    m_total: int
    block_size: int
    n_blocks: int
    ram_budget_bytes: int
    prec_bytes: int
    n_points: int
    mode: str = "dense"          # "dense", "sparse" or "fixed"
    n_extra: int = 0             # polynomial columns appended to the system
    nnz_estimate: int | None = None

    def __post_init__(self):
        if not 1 <= self.block_size <= self.m_total:
            raise ValueError(f"block size {self.block_size} outside [1, {self.m_total}]")
        if self.n_blocks != math.ceil(self.m_total / self.block_size):
            raise ValueError("n_blocks inconsistent with m_total and block_size")

    @property
    def system_size(self) -> int:
        return self.m_total + self.n_extra

    @property
    def n_pairs(self) -> int:
        """Number of Gram blocks computed (diagonal plus upper triangle)."""
        return self.n_blocks * (self.n_blocks + 1) // 2

    def blocks(self) -> list[tuple[int, int]]:
        b = self.block_size
        return [(k * b, min((k + 1) * b, self.m_total)) for k in range(self.n_blocks)]

    def fixed_scalars(self) -> int:
        m = self.system_size
        return m * m + m

    def dense_bound_bytes(self) -> int:
        return (self.fixed_scalars() + 2 * self.block_size * self.n_points) * self.prec_bytes

    def sparse_bound_bytes(self, nnz_max: int) -> int:
        return (self.fixed_scalars() + 2 * nnz_max) * self.prec_bytes


def _fixed_scalars(m_refs, n_extra):
    m = m_refs + n_extra
    return m * m + m


def choose_block_size(n_points: int, m_refs: int, ram_budget, prec: int = SCALAR_BYTES,
                      nnz_estimate: Callable[[int], int] | None = None,
                      n_extra: int = 0) -> BlockPlan:
    """Largest block width that keeps the working set under ``ram_budget``.

    Without ``nnz_estimate`` every sub-matrix is budgeted as dense
    (``N * M_B`` scalars). With it, ``nnz_estimate(M_B)`` must return the
    expected maximum nonzeros of one ``M_B``-column block.
    """
    n_points, m_refs, prec = int(n_points), int(m_refs), int(prec)
    budget = int(ram_budget)
    if min(n_points, m_refs, prec) < 1 or budget < 1:
        raise ValueError("counts, precision and budget must be positive")
    fixed = _fixed_scalars(m_refs, n_extra) * prec
    if fixed >= budget:
        raise BudgetError(f"the {m_refs + n_extra}x{m_refs + n_extra} normal system alone needs "
                          f"{fixed} bytes, budget is {budget}; reduce the number of reference points")
    spare = budget - fixed - 1  # strict inequality
    if nnz_estimate is None:
        width = spare // (2 * n_points * prec)
        mode, est = "dense", None
    else:
        def fits(b):
            return 2 * int(nnz_estimate(b)) * prec <= spare
        lo, hi = 0, m_refs
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if fits(mid):
                lo = mid
            else:
                hi = mid - 1
        width = lo
        mode = "sparse"
        est = int(nnz_estimate(max(width, 1)))
    if width < 1:
        raise BudgetError(f"budget {budget} B leaves no room for even a one-column block; "
                          "raise the budget or reduce the number of reference points")
    width = min(width, m_refs)
    return BlockPlan(m_refs, width, math.ceil(m_refs / width), budget, prec, n_points,
                     mode=mode, n_extra=n_extra, nnz_estimate=est)


def fixed_plan(n_points: int, m_refs: int, block_size: int, ram_budget=DEFAULT_RAM_BUDGET,
               prec: int = SCALAR_BYTES, n_extra: int = 0) -> BlockPlan:
    """Plan with an explicit block width (clamped to ``m_refs``)."""
    width = max(1, min(int(block_size), int(m_refs)))
    return BlockPlan(int(m_refs), width, math.ceil(m_refs / width), int(ram_budget), int(prec),
                     int(n_points), mode="fixed", n_extra=n_extra)


class NeighborCountEstimator:
    """Predicts the nonzeros of a block from neighbour counts of sampled references.

    ``min(M, sample)`` evenly spaced reference points are queried against the
    data index; a block of width ``b`` is estimated at ``b`` times the largest
    sampled count.
    """

    def __init__(self, index: PointIndex, refs, kernel: KernelSpec, sample: int = 256):
        refs = np.asarray(refs, dtype=np.float64)
        m = refs.shape[0]
        picks = np.unique(np.linspace(0, m - 1, min(m, sample)).round().astype(int))
        radius = kernel.support_radius
        self.counts = np.array([index.radius_query(refs[j], radius)[0].size for j in picks])
        self.per_ref = int(self.counts.max()) if self.counts.size else 0

    def __call__(self, width: int) -> int:
        return int(width) * self.per_ref


# ---------------------------------------------------------------------------
# memory accounting

class MemoryAccountant:
    """Tracks named long-lived buffers and the peak of their total size."""

    def __init__(self):
        self.live: dict[str, int] = {}
        self.current = 0
        self.peak = 0

    def alloc(self, name: str, nbytes: int):
        if name in self.live:
            raise KeyError(f"buffer {name!r} already tracked")
        self.live[name] = int(nbytes)
        self.current += int(nbytes)
        self.peak = max(self.peak, self.current)

    def free(self, name: str):
        self.current -= self.live.pop(name)


# ---------------------------------------------------------------------------
# normal system

@dataclass
class BuildDiagnostics:
    empty_support: list[int] = field(default_factory=list)
    design_nnz: int = 0
    max_block_nnz: int = 0
    n_assemblies: int = 0
    n_pairs: int = 0
    assembly_seconds: float = 0.0
    gram_seconds: float = 0.0
    peak_bytes: int = 0


@dataclass(eq=False)
class NormalSystem:
    b: np.ndarray
    rhs: np.ndarray
    poly: bool
    n_refs: int
    diagnostics: BuildDiagnostics = field(default_factory=BuildDiagnostics)

    @property
    def size(self) -> int:
        return self.b.shape[0]


def poly_basis(points: np.ndarray) -> np.ndarray:
    """Rows ``(x^T, 1)`` of the linear polynomial basis."""
    return np.column_stack([points, np.ones(points.shape[0])])


def build_normal_system(cloud: PointCloud, refs, kernel: KernelSpec, plan: BlockPlan,
                        poly: bool = False, index: PointIndex | None = None,
                        accountant: MemoryAccountant | None = None) -> NormalSystem:
    """Assemble ``B`` and the right-hand side block by block.

    For every block column ``k`` the sub-matrix ``A_k`` is assembled once and
    kept while ``A_l`` (``l > k``) are assembled, multiplied in and dropped.
    ``A^T h`` and, with ``poly``, ``A^T P`` are accumulated in the same pass;
    ``P^T P`` and ``P^T h`` come from one pass over the points.
    """
    refs = np.ascontiguousarray(refs, dtype=np.float64)
    m = refs.shape[0]
    if m == 0:
        raise ValueError("need at least one reference point")
    if plan.m_total != m:
        raise ValueError(f"plan is for {plan.m_total} reference points, got {m}")
    if index is None:
        index = PointIndex(cloud.points)
    acct = accountant if accountant is not None else MemoryAccountant()
    impl = _backend.impl
    n_extra = cloud.dim + 1 if poly else 0
    size = m + n_extra

    B = np.zeros((size, size), dtype=ACCUM_DTYPE)
    rhs = np.zeros(size, dtype=ACCUM_DTYPE)
    acct.alloc("normal_system", B.nbytes + rhs.nbytes)
    rhs_col = rhs.reshape(-1, 1)
    h = cloud.values.reshape(-1, 1)
    P = poly_basis(cloud.points) if poly else None

    diag = BuildDiagnostics(n_pairs=plan.n_pairs)
    clock = time.perf_counter

    def assemble(lo, hi, name):
        t0 = clock()
        a = assemble_submatrix(index, refs[lo:hi], kernel)
        diag.assembly_seconds += clock() - t0
        diag.n_assemblies += 1
        acct.alloc(name, a.nbytes)
        return a

    blocks = plan.blocks()
    for k, (k0, k1) in enumerate(blocks):
        ak = assemble(k0, k1, f"A[{k}]")
        t0 = clock()
        counts = np.bincount(ak.col, minlength=k1 - k0)
        diag.empty_support.extend(int(k0 + j) for j in np.flatnonzero(counts == 0))
        diag.design_nnz += ak.nnz
        diag.max_block_nnz = max(diag.max_block_nnz, ak.nnz)
        impl.sort_rows(ak.triplets)
        impl.gram_rows(B[k0:k1, k0:k1], ak.triplets, ak.triplets, True)
        impl.t_dot(ak.triplets, h, rhs_col[k0:k1])
        if poly:
            impl.t_dot(ak.triplets, P, B[k0:k1, m:])
        diag.gram_seconds += clock() - t0
        for l in range(k + 1, len(blocks)):
            l0, l1 = blocks[l]
            al = assemble(l0, l1, f"A[{l}]")
            t0 = clock()
            impl.sort_rows(al.triplets)
            impl.gram_rows(B[k0:k1, l0:l1], ak.triplets, al.triplets, False)
            diag.gram_seconds += clock() - t0
            acct.free(f"A[{l}]")
            del al
        acct.free(f"A[{k}]")
        del ak

    t0 = clock()
    if poly:
        Pl = P.astype(ACCUM_DTYPE)
        B[m:, m:] = Pl.T @ Pl
        rhs[m:] = Pl.T @ cloud.values.astype(ACCUM_DTYPE)
    for i in range(1, size):
        B[i, :i] = B[:i, i]
    diag.gram_seconds += clock() - t0
    diag.peak_bytes = acct.peak
    acct.free("normal_system")
    if diag.empty_support:
        log.warning("%d reference point(s) have no data in their support: %s",
                    len(diag.empty_support), diag.empty_support[:10])
    return NormalSystem(B, rhs, poly, m, diag)


# ---------------------------------------------------------------------------
# solving

@dataclass
class SolveDiagnostics:
    ridge_lambda: float = 0.0
    ridge_shift: float = 0.0
    min_pivot: float = float("nan")
    pivot_ratio: float = float("nan")
    empty_support: list[int] = field(default_factory=list)
    seconds: float = 0.0


@dataclass
class Solution:
    weights: np.ndarray
    poly_coeffs: tuple[np.ndarray, float] | None
    diagnostics: SolveDiagnostics


def _factor(B, shift):
    """Jacobi-scaled, shifted copy of ``B`` factorised in place."""
    A = B.copy()
    if shift:
        A[np.diag_indices_from(A)] += shift
    d = np.diag(A).copy()
    s = np.ones_like(d)
    pos = d > 0
    s[pos] = 1 / np.sqrt(d[pos])
    A *= s[:, None]
    A *= s[None, :]
    _backend.impl.cholesky(A, PIVOT_TOL)
    return A, s


def solve_weights(system: NormalSystem) -> Solution:
    """Solve the symmetric normal equations.

    A Cholesky factorisation of the Jacobi-scaled matrix is tried first. On
    breakdown ``lambda * trace(B) / size`` is added to the diagonal with
    ``lambda`` escalating from 1e-10 to 1e-6; the value used is reported.
    """
    t0 = time.perf_counter()
    B = system.b
    size = B.shape[0]
    trace = np.trace(B)
    diag = SolveDiagnostics(empty_support=list(system.diagnostics.empty_support))
    last = None
    for lam in (0.0,) + RIDGE_STEPS:
        shift = lam * trace / size
        try:
            L, s = _factor(B, shift)
        except PivotError as err:
            last = err
            log.info("Cholesky breakdown at pivot %d (lambda=%g)", err.index, lam)
            continue
        y = _backend.impl.cho_solve(L, s * system.rhs)
        coef = (s * y).astype(np.float64)
        piv = np.diag(L).astype(np.float64) ** 2
        diag.ridge_lambda = lam
        diag.ridge_shift = float(shift)
        diag.min_pivot = float(piv.min())
        diag.pivot_ratio = float(piv.max() / piv.min())
        if lam:
            log.warning("normal matrix singular; solved with ridge lambda=%g", lam)
        break
    else:
        raise SingularSystemError(last.index, f"normal equations unsolvable after ridge "
                                              f"lambda={RIDGE_STEPS[-1]}: pivot {last.index}")
    diag.seconds = time.perf_counter() - t0
    m = system.n_refs
    poly = (coef[m:-1].copy(), float(coef[-1])) if system.poly else None
    return Solution(coef[:m].copy(), poly, diag)


# ---------------------------------------------------------------------------
# model

@dataclass
class FitInfo:
    plan: BlockPlan
    build: BuildDiagnostics
    solve: SolveDiagnostics
    backend: str


@dataclass(eq=False)
class Model:
    kernel: KernelSpec
    refs: np.ndarray
    weights: np.ndarray
    poly_coeffs: tuple[np.ndarray, float] | None = None
    centering_offset: np.ndarray | None = None
    info: FitInfo | None = field(default=None, repr=False)

    def __post_init__(self):
        self.refs = np.atleast_2d(np.asarray(self.refs, dtype=np.float64))
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.weights.shape[0] != self.refs.shape[0]:
            raise ValueError(f"{self.weights.shape[0]} weights for {self.refs.shape[0]} reference points")
        if self.centering_offset is None:
            self.centering_offset = np.zeros(self.dim)
        self.centering_offset = np.asarray(self.centering_offset, dtype=np.float64).reshape(-1)
        if self.poly_coeffs is not None:
            a, a0 = self.poly_coeffs
            a = np.asarray(a, dtype=np.float64).reshape(-1)
            if a.shape[0] != self.dim:
                raise ValueError("polynomial gradient has the wrong dimension")
            self.poly_coeffs = (a, float(a0))

    @property
    def dim(self) -> int:
        return self.refs.shape[1]

    @property
    def has_poly(self) -> bool:
        return self.poly_coeffs is not None

    def __call__(self, points):
        from .model import evaluate_model
        return evaluate_model(self, points)


def fit(cloud: PointCloud, refs, kernel: KernelSpec, poly: bool = False,
        ram_budget=DEFAULT_RAM_BUDGET, prec: int = SCALAR_BYTES,
        block_size: int | None = None, plan_mode: str = "sparse",
        index: PointIndex | None = None,
        accountant: MemoryAccountant | None = None) -> Model:
    """Fit weights (and optionally a linear polynomial) to ``cloud``.

    ``refs`` must be in the same coordinate frame as ``cloud.points``; the
    model records ``cloud.offset`` so it can be evaluated at raw coordinates.
    ``block_size`` overrides the planner; otherwise ``plan_mode`` picks the
    dense or the sparse (neighbour-count) memory model.
    """
    refs = np.ascontiguousarray(np.atleast_2d(np.asarray(refs, dtype=np.float64)))
    if refs.shape[0] == 0:
        raise ValueError("need at least one reference point")
    if refs.shape[1] != cloud.dim:
        raise ValueError(f"reference points have dimension {refs.shape[1]}, data has {cloud.dim}")
    n, m = len(cloud), refs.shape[0]
    if n < m:
        warnings.warn(f"fewer data points ({n}) than reference points ({m}); "
                      "the least-squares system is underdetermined", stacklevel=2)
    if index is None:
        index = PointIndex(cloud.points)
    n_extra = cloud.dim + 1 if poly else 0
    if block_size is not None:
        plan = fixed_plan(n, m, block_size, ram_budget, prec, n_extra)
    elif plan_mode == "dense":
        plan = choose_block_size(n, m, ram_budget, prec, n_extra=n_extra)
    elif plan_mode == "sparse":
        est = NeighborCountEstimator(index, refs, kernel)
        plan = choose_block_size(n, m, ram_budget, prec, nnz_estimate=est, n_extra=n_extra)
    else:
        raise ValueError(f"unknown plan mode {plan_mode!r}")
    log.info("block plan: M_B=%d, %d block column(s), %d Gram blocks",
             plan.block_size, plan.n_blocks, plan.n_pairs)
    system = build_normal_system(cloud, refs, kernel, plan, poly, index, accountant)
    sol = solve_weights(system)
    return Model(kernel, refs, sol.weights, sol.poly_coeffs, cloud.offset.copy(),
                 info=FitInfo(plan, system.diagnostics, sol.diagnostics, _backend.name()))


# ---------------------------------------------------------------------------
# serialisation

def model_to_dict(model: Model) -> dict:
    poly = None
    if model.poly_coeffs is not None:
        a, a0 = model.poly_coeffs
        poly = {"gradient": a.tolist(), "constant": a0}
    return {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "kernel": model.kernel.name,
        "alpha": model.kernel.alpha,
        "dimension": model.dim,
        "centering_offset": model.centering_offset.tolist(),
        "reference_points": model.refs.tolist(),
        "weights": model.weights.tolist(),
        "polynomial": poly,
    }


def model_from_dict(doc: dict) -> Model:
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} document")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    poly = doc.get("polynomial")
    coeffs = None if poly is None else (np.array(poly["gradient"], dtype=np.float64),
                                        float(poly["constant"]))
    refs = np.array(doc["reference_points"], dtype=np.float64).reshape(-1, int(doc["dimension"]))
    return Model(KernelSpec(Family.parse(doc["kernel"]), float(doc["alpha"])), refs,
                 np.array(doc["weights"], dtype=np.float64), coeffs,
                 np.array(doc["centering_offset"], dtype=np.float64))


def save_model(model: Model, path) -> None:
    """Write the model as JSON (floats in shortest round-trip form)."""
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> Model:
    return model_from_dict(json.loads(Path(path).read_text()))
