"""Point clouds: synthetic generation, XYZ text I/O, centring, reference grids."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_PRIMES = (2, 3, 5)
_SPLIT = re.compile(r"[,\s]+")


@dataclass(frozen=True, eq=False)
class PointCloud:
    """``N`` points in ``E^n`` with one scalar value each.

    ``offset`` is the translation already subtracted from the points
    (zero for raw data).
    """

    points: np.ndarray
    values: np.ndarray
    offset: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a point cloud needs at least one point")
        if vals.shape[0] != pts.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {vals.shape[0]} values")
        if not (np.isfinite(pts).all() and np.isfinite(vals).all()):
            raise ValueError("point cloud contains non-finite entries")
        off = np.zeros(pts.shape[1]) if self.offset is None else \
            np.array(self.offset, dtype=np.float64).reshape(-1)
        if off.shape != (pts.shape[1],):
            raise ValueError("offset dimension does not match the points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "offset", off)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def raw_points(self) -> np.ndarray:
        """Coordinates before centring."""
        return self.points + self.offset

    def subset(self, idx) -> "PointCloud":
        return PointCloud(self.points[idx], self.values[idx], self.offset)


def radical_inverse(indices, base: int) -> np.ndarray:
    """Van der Corput radical inverse of non-negative integers in ``base``."""
    k = np.array(indices, dtype=np.int64)
    out = np.zeros(k.shape)
    scale = 1.0 / base
    while np.any(k > 0):
        out += (k % base) * scale
        k //= base
        scale /= base
    return out


def halton_points(count: int, dims: int = 2) -> np.ndarray:
    """First ``count`` Halton points in ``[0, 1)^dims``, bases 2, 3, 5, indices from 1."""
    if dims not in (1, 2, 3):
        raise ValueError(f"Halton points are provided for 1 to 3 dimensions, not {dims}")
    if count < 1:
        raise ValueError("count must be >= 1")
    idx = np.arange(1, count + 1)
    return np.column_stack([radical_inverse(idx, b) for b in _PRIMES[:dims]])


def franke(x) -> np.ndarray | float:
    """Franke's test function on ``[0, 1]^2``; accepts one point or an (N, 2) array."""
    p = np.asarray(x, dtype=np.float64)
    x1, x2 = 9.0 * p[..., 0], 9.0 * p[..., 1]
    f1 = 0.75 * np.exp(-(x1 - 2.0) ** 2 / 4.0 - (x2 - 2.0) ** 2 / 4.0)
    f2 = 0.75 * np.exp(-(x1 + 1.0) ** 2 / 49.0 - (x2 + 1.0) ** 2 / 10.0)
    f3 = 0.50 * np.exp(-(x1 - 7.0) ** 2 / 4.0 - (x2 - 3.0) ** 2 / 4.0)
    f4 = 0.20 * np.exp(-(x1 - 4.0) ** 2 - (x2 - 7.0) ** 2)
    out = f1 + f2 + f3 - f4
    return float(out) if out.ndim == 0 else out


def synthetic_cloud(count: int = 1089) -> PointCloud:
    """Halton points in the unit square carrying Franke values."""
    pts = halton_points(count, 2)
    return PointCloud(pts, franke(pts))


def read_table(path, min_cols: int, max_cols: int) -> np.ndarray:
    """Numeric rows of a whitespace/comma separated text file.

    Blank lines and lines starting with ``#`` are skipped. All rows must have
    the same number of columns.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    rows = []
    width = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            tokens = [t for t in _SPLIT.split(text) if t]
            try:
                vals = [float(t) for t in tokens]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value in {text!r}") from None
            if not min_cols <= len(vals) <= max_cols:
                raise ValueError(f"{path}:{lineno}: expected {min_cols}-{max_cols} columns, "
                                 f"got {len(vals)}")
            if width is not None and len(vals) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} columns like the rows above, "
                                 f"got {len(vals)}")
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            width = len(vals)
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def load_xyz(path) -> PointCloud:
    """Read ``x y h`` records (whitespace or comma separated, ``#`` comments)."""
    table = read_table(path, 3, 3)
    return PointCloud(table[:, :2], table[:, 2])


def write_xyz(path, points, values=None, extra=()) -> None:
    """Write one row per point: coordinates, then ``values``, then any ``extra`` columns.

    Numbers are written with ``repr`` so reading them back is exact.
    """
    cols = [np.asarray(points, dtype=np.float64).reshape(len(points), -1)]
    if values is not None:
        cols.append(np.asarray(values, dtype=np.float64).reshape(-1, 1))
    cols.extend(np.asarray(e, dtype=np.float64).reshape(-1, 1) for e in extra)
    table = np.hstack(cols)
    with open(path, "w") as fh:
        for row in table.tolist():
            fh.write(" ".join(repr(v) for v in row) + "\n")


def center_cloud(cloud: PointCloud) -> PointCloud:
    """Translate so the coordinate mean (centre of gravity) sits at the origin."""
    mean = cloud.points.mean(axis=0)
    return PointCloud(cloud.points - mean, cloud.values, cloud.offset + mean)


def uniform_grid_refs(aabb, count: int | None = None, per_axis=None) -> np.ndarray:
    """Evenly spaced reference grid over a bounding box, boundary included.

    Give either ``count`` (a perfect n-th power in ``E^n``) or ``per_axis``
    counts. An axis with one sample sits at the box centre. Points are ordered
    with the first axis varying slowest.
    """
    lo = np.asarray(aabb[0], dtype=np.float64).reshape(-1)
    hi = np.asarray(aabb[1], dtype=np.float64).reshape(-1)
    dim = lo.shape[0]
    if (count is None) == (per_axis is None):
        raise ValueError("give exactly one of count or per_axis")
    if per_axis is None:
        side = round(count ** (1.0 / dim))
        if count < 1 or side ** dim != count:
            raise ValueError(f"{count} reference points do not form a square grid in {dim}D; "
                             "pass per-axis counts instead")
        per_axis = (side,) * dim
    per_axis = tuple(int(n) for n in per_axis)
    if len(per_axis) != dim or min(per_axis) < 1:
        raise ValueError("per_axis needs one positive count per dimension")
    axes = [np.linspace(a, b, n) if n > 1 else np.array([(a + b) / 2.0])
            for a, b, n in zip(lo, hi, per_axis)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])
