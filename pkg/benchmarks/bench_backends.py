"""Time the compiled core against the numpy fallback on the same inputs.

    python benchmarks/bench_backends.py [--points 20000] [--refs 20x20] [--repeat 3]

Each stage runs on both backends; the outputs are compared for exact equality
and the table lists the best-of-``repeat`` wall time in milliseconds.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from blockrbf import _backend
from blockrbf.data import center_cloud, synthetic_cloud, uniform_grid_refs
from blockrbf.kernels import KernelSpec
from blockrbf.solver import build_normal_system, fit, fixed_plan, solve_weights
from blockrbf.spatial import PointIndex
from blockrbf.sparse import assemble_submatrix


def best_of(repeat, func):
    best, result = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = func()
        best = min(best, time.perf_counter() - t0)
    return best, result


def stages(cloud, refs, kernel, block):
    index = PointIndex(cloud.points)
    plan = fixed_plan(len(cloud), refs.shape[0], block)
    system = {}

    def assemble():
        return assemble_submatrix(index, refs, kernel).triplets

    def build():
        system["s"] = build_normal_system(cloud, refs, kernel, plan, False, index)
        return system["s"].b

    def solve():
        return solve_weights(system["s"]).weights

    def full():
        return fit(cloud, refs, kernel, block_size=block).weights

    return [("assemble", assemble), ("normal system", build), ("cholesky solve", solve),
            ("fit", full)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--refs", default="20x20", help="grid counts AxB")
    ap.add_argument("--alpha", type=float, default=8.0)
    ap.add_argument("--kernel", default="wendland-3-3")
    ap.add_argument("--block", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if not _backend.compiled_available():
        raise SystemExit("compiled core is not built; run `pip install -e . --no-build-isolation`")
    cloud = center_cloud(synthetic_cloud(args.points))
    refs = uniform_grid_refs(cloud.aabb(), per_axis=[int(v) for v in args.refs.split("x")])
    kernel = KernelSpec(args.kernel, args.alpha)

    print(f"N={len(cloud)} M={refs.shape[0]} kernel={kernel.name} alpha={args.alpha} "
          f"block={args.block}")
    print(f"{'stage':<16}{'compiled ms':>13}{'python ms':>12}{'speedup':>9}  identical")
    for (label, fc), (_, fp) in zip(*(stages(cloud, refs, kernel, args.block) for _ in range(2))):
        with _backend.use_backend("compiled"):
            tc, rc = best_of(args.repeat, fc)
        with _backend.use_backend("python"):
            tp, rp = best_of(args.repeat, fp)
        same = np.array_equal(rc, rp)
        print(f"{label:<16}{1e3 * tc:>13.1f}{1e3 * tp:>12.1f}{tp / tc:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
