"""Evaluating fitted models and measuring approximation error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PointCloud, write_xyz
from .solver import Model
from .spatial import PointIndex
from .sparse import assemble_submatrix, coo_matvec

# Reference points handled per sub-matrix during evaluation.
EVAL_CHUNK = 256


def evaluate_model(model: Model, points) -> np.ndarray:
    """Values of the fitted function at ``points`` (raw coordinates).

    The model's centring offset is subtracted first. The queries are indexed
    and swept one chunk of reference points at a time, which reuses the
    sub-matrix assembly: ``f = sum_k A_k c_k + P k``.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1) if pts.shape[0] == model.dim else pts.reshape(-1, 1)
    if pts.shape[1] != model.dim:
        raise ValueError(f"query points have dimension {pts.shape[1]}, model has {model.dim}")
    if pts.shape[0] == 0:
        return np.zeros(0)
    q = pts - model.centering_offset
    out = np.zeros(q.shape[0])
    if np.any(model.weights != 0.0):
        index = PointIndex(q)
        for lo in range(0, model.refs.shape[0], EVAL_CHUNK):
            hi = min(lo + EVAL_CHUNK, model.refs.shape[0])
            a = assemble_submatrix(index, model.refs[lo:hi], model.kernel)
            out += coo_matvec(a, model.weights[lo:hi])
    if model.poly_coeffs is not None:
        grad, a0 = model.poly_coeffs
        out += q @ grad + a0
    return out


@dataclass
class ErrorReport:
    mean_absolute_error: float
    deviation_of_error: float
    mean_relative_error_pct: float
    signed_errors: np.ndarray
    density_pct: float | None = None

    def to_dict(self) -> dict:
        """Scalar fields only; ``signed_errors`` is exported separately."""
        return {
            "mean_absolute_error": self.mean_absolute_error,
            "deviation_of_error": self.deviation_of_error,
            "mean_relative_error_pct": self.mean_relative_error_pct,
            "density_pct": self.density_pct,
            "n_points": int(self.signed_errors.size),
        }


def error_measures(signed) -> tuple[float, float]:
    """Mean and population variance of the absolute errors."""
    err = np.abs(np.asarray(signed, dtype=np.float64))
    return float(err.mean()), float(err.var())


def density_pct(nnz: int, n_rows: int, n_cols: int) -> float:
    """Share of nonzero entries of an ``n_rows x n_cols`` matrix, in percent."""
    return 100.0 * nnz / (n_rows * n_cols)


def error_report(model: Model, cloud: PointCloud, design_nnz: int | None = None) -> ErrorReport:
    """Error measures of ``model`` on ``cloud``.

    * deviation of error: population variance of the absolute errors
    * mean relative error: mean absolute error over mean ``|h|``, in percent
    * density: ``100 * nnz / (N * M)`` of the design matrix, if ``design_nnz`` is given
    """
    f = evaluate_model(model, cloud.raw_points())
    signed = f - cloud.values
    mae, dev = error_measures(signed)
    scale = float(np.abs(cloud.values).mean())
    rel = 100.0 * mae / scale if scale > 0 else float("nan")
    density = None
    if design_nnz is not None:
        density = density_pct(design_nnz, len(cloud), model.refs.shape[0])
    return ErrorReport(mae, dev, rel, signed, density)


def export_signed_errors(path, cloud: PointCloud, model: Model) -> None:
    """Write ``x y h f signed_error`` rows at raw coordinates."""
    raw = cloud.raw_points()
    f = evaluate_model(model, raw)
    write_xyz(path, raw, cloud.values, extra=(f, f - cloud.values))
