"""Median-split kd-tree for fixed-radius neighbour queries.

The tree is stored as flat arrays so the compiled core can walk it without
touching Python objects. Every node owns a contiguous slice ``perm[start:end]``
of the original point indices, plus its axis-aligned bounding box.
"""
from __future__ import annotations

import numpy as np

from . import _backend

LEAF_SIZE = 16


class PointIndex:
    """Immutable kd-tree over ``N`` points in ``E^n``.

    Attributes
    ----------
    points : (N, n) float64 array in input order
    perm : (N,) int64, tree order -> original index
    tree_points : (N, n) float64, ``points[perm]`` (contiguous per node)
    start, end, left, right : (n_nodes,) int64 node arrays, ``left == -1`` on leaves
    lo, hi : (n_nodes, n) float64 bounding boxes
    """

    def __init__(self, points, leaf_size: int = LEAF_SIZE):
        pts = np.array(points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("cannot build an index over an empty point set")
        bad = ~np.isfinite(pts).all(axis=1)
        if bad.any():
            raise ValueError(f"non-finite coordinate at point index {int(np.flatnonzero(bad)[0])}")
        if leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        self.points = np.ascontiguousarray(pts)
        self.points.setflags(write=False)
        self.leaf_size = int(leaf_size)
        self._build()

    def _build(self):
        n, dim = self.points.shape
        perm = np.arange(n, dtype=np.int64)
        start, end, left, right, lo, hi = [], [], [], [], [], []

        def new_node(s, e):
            sub = self.points[perm[s:e]]
            start.append(s)
            end.append(e)
            left.append(-1)
            right.append(-1)
            lo.append(sub.min(axis=0))
            hi.append(sub.max(axis=0))
            return len(start) - 1

        stack = [(new_node(0, n), 0)]
        while stack:
            node, depth = stack.pop()
            s, e = start[node], end[node]
            if e - s <= self.leaf_size:
                continue
            axis = depth % dim
            mid = (e - s) // 2
            seg = perm[s:e]
            order = np.argpartition(self.points[seg, axis], mid, kind="introselect")
            perm[s:e] = seg[order]
            lchild = new_node(s, s + mid)
            rchild = new_node(s + mid, e)
            left[node] = lchild
            right[node] = rchild
            stack.append((rchild, depth + 1))
            stack.append((lchild, depth + 1))

        self.perm = perm
        self.tree_points = np.ascontiguousarray(self.points[perm])
        self.start = np.asarray(start, dtype=np.int64)
        self.end = np.asarray(end, dtype=np.int64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.lo = np.ascontiguousarray(lo, dtype=np.float64).reshape(-1, dim)
        self.hi = np.ascontiguousarray(hi, dtype=np.float64).reshape(-1, dim)
        for arr in (self.perm, self.tree_points, self.start, self.end,
                    self.left, self.right, self.lo, self.hi):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_nodes(self) -> int:
        return len(self.start)

    def __len__(self) -> int:
        return self.points.shape[0]

    def radius_query(self, center, radius: float):
        return radius_query(self, center, radius)


def build(points, leaf_size: int = LEAF_SIZE) -> PointIndex:
    return PointIndex(points, leaf_size=leaf_size)


def radius_query(index: PointIndex, center, radius: float):
    """Points strictly closer than ``radius`` to ``center``.

    Returns ``(indices, distances)``; indices are original point indices in
    ascending order.
    """
    radius = float(radius)
    if not radius > 0.0:
        raise ValueError("radius must be positive")
    c = np.asarray(center, dtype=np.float64).reshape(-1)
    if c.shape[0] != index.dim:
        raise ValueError(f"center has dimension {c.shape[0]}, index has {index.dim}")
    return _backend.impl.radius_query(index, np.ascontiguousarray(c), radius)
