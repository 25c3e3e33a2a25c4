"""Command line front end.

Result files and stdout are deterministic; timings go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time

import numpy as np

from . import _backend
from .data import center_cloud, halton_points, franke, load_xyz, read_table, uniform_grid_refs, write_xyz
from .kernels import KernelSpec, kernel_names
from .model import error_measures, error_report, evaluate_model, export_signed_errors
from .solver import (DEFAULT_RAM_BUDGET, Model, build_normal_system, fit, fixed_plan,
                     load_model, save_model, solve_weights)
from .spatial import PointIndex

log = logging.getLogger("blockrbf")


def _parse_grid(spec: str):
    """``"81"`` (square grid) or ``"9x9"`` (per-axis counts)."""
    parts = spec.lower().split("x")
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid spec {spec!r}; use M or AxB") from None
    if min(nums) < 1:
        raise argparse.ArgumentTypeError("grid counts must be positive")
    return nums[0] if len(nums) == 1 else tuple(nums)


def _parse_sizes(spec: str):
    try:
        sizes = [int(s) for s in spec.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad block size list {spec!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("block sizes must be positive integers")
    return sizes


def _add_fit_args(p):
    p.add_argument("--in", dest="input", required=True, help="XYZ point cloud (x y h)")
    p.add_argument("--kernel", required=True, choices=kernel_names())
    p.add_argument("--alpha", required=True, type=float, help="shape parameter (support radius 1/alpha)")
    refs = p.add_mutually_exclusive_group(required=True)
    refs.add_argument("--refs-grid", type=_parse_grid, metavar="M|AxB",
                      help="uniform grid over the data bounding box, boundary included")
    refs.add_argument("--refs-file", metavar="PATH", help="reference points, one 'x y' per line")
    p.add_argument("--poly", action="store_true", help="add linear polynomial reproduction")
    p.add_argument("--ram-budget", type=int, default=DEFAULT_RAM_BUDGET, metavar="BYTES")
    p.add_argument("--plan", choices=("sparse", "dense"), default="sparse",
                   help="memory model used to choose the block size")


def _kernel(args):
    return KernelSpec(args.kernel, args.alpha)


def _prepare(args):
    """Load, centre, and build reference points in the centred frame."""
    cloud = load_xyz(args.input)
    if args.refs_file:
        refs = read_table(args.refs_file, cloud.dim, cloud.dim + 1)[:, :cloud.dim]
    elif isinstance(args.refs_grid, tuple):
        refs = uniform_grid_refs(cloud.aabb(), per_axis=args.refs_grid)
    else:
        refs = uniform_grid_refs(cloud.aabb(), args.refs_grid)
    centred = center_cloud(cloud)
    return centred, np.ascontiguousarray(refs - centred.offset)


def _timing(**phases_ms):
    line = " ".join(f"{k}={v:.1f}ms" for k, v in phases_ms.items())
    print(f"timing: {line}", file=sys.stderr)


def cmd_gen_synthetic(args):
    pts = halton_points(args.count, 2)
    write_xyz(args.out, pts, franke(pts))
    return 0


def cmd_fit(args):
    t0 = time.perf_counter()
    cloud, refs = _prepare(args)
    model = fit(cloud, refs, _kernel(args), poly=args.poly, ram_budget=args.ram_budget,
                block_size=args.block_size, plan_mode=args.plan)
    save_model(model, args.out)
    info = model.info
    report = error_report(model, cloud, info.build.design_nnz)
    if args.errors:
        export_signed_errors(args.errors, cloud, model)
    doc = {
        "kernel": model.kernel.name,
        "alpha": model.kernel.alpha,
        "poly": model.has_poly,
        "n_points": len(cloud),
        "n_refs": int(refs.shape[0]),
        "plan": {"mode": info.plan.mode, "block_size": info.plan.block_size,
                 "n_blocks": info.plan.n_blocks, "n_pairs": info.plan.n_pairs},
        "design_nnz": info.build.design_nnz,
        "empty_support": info.build.empty_support,
        "ridge_lambda": info.solve.ridge_lambda,
        "report": report.to_dict(),
    }
    text = json.dumps(doc, indent=1)
    print(text)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    _timing(assembly=1e3 * info.build.assembly_seconds,
            gram_solve=1e3 * (info.build.gram_seconds + info.solve.seconds),
            total=1e3 * (time.perf_counter() - t0))
    print(f"backend: {info.backend}", file=sys.stderr)
    return 0


def cmd_eval(args):
    model = load_model(args.model)
    table = read_table(args.input, 1, 64)
    d = model.dim
    if table.shape[1] not in (d, d + 1):
        raise ValueError(f"points file has {table.shape[1]} columns; a {d}-D model needs "
                         f"{d} (coordinates) or {d + 1} (coordinates and value)")
    pts = table[:, :d]
    f = evaluate_model(model, pts)
    if table.shape[1] == d + 1:
        h = table[:, d]
        write_xyz(args.out, pts, h, extra=(f, f - h))
        mae, dev = error_measures(f - h)
        print(json.dumps({"mean_absolute_error": mae, "deviation_of_error": dev,
                          "n_points": int(h.size)}, indent=1))
    else:
        write_xyz(args.out, pts, f)
    return 0


BENCH_FIELDS = ["block_size", "n_blocks", "n_pairs", "n_assemblies", "assembly_ms",
                "gram_solve_ms", "total_ms", "assembly_share", "mean_absolute_error",
                "identical_system"]


def cmd_bench_blocks(args):
    cloud, refs = _prepare(args)
    kernel = _kernel(args)
    index = PointIndex(cloud.points)
    n_extra = cloud.dim + 1 if args.poly else 0
    rows, first = [], None
    for size in args.block_sizes:
        plan = fixed_plan(len(cloud), refs.shape[0], size, args.ram_budget, n_extra=n_extra)
        t0 = time.perf_counter()
        system = build_normal_system(cloud, refs, kernel, plan, args.poly, index)
        sol = solve_weights(system)
        total = time.perf_counter() - t0
        if first is None:
            first = system
        same = np.array_equal(system.b, first.b) and np.array_equal(system.rhs, first.rhs)
        model = Model(kernel, refs, sol.weights, sol.poly_coeffs, cloud.offset)
        report = error_report(model, cloud)
        diag = system.diagnostics
        asm = diag.assembly_seconds
        rest = diag.gram_seconds + sol.diagnostics.seconds
        rows.append({
            "block_size": plan.block_size, "n_blocks": plan.n_blocks, "n_pairs": plan.n_pairs,
            "n_assemblies": diag.n_assemblies, "assembly_ms": round(1e3 * asm, 3),
            "gram_solve_ms": round(1e3 * rest, 3), "total_ms": round(1e3 * total, 3),
            "assembly_share": round(asm / (asm + rest), 4) if asm + rest > 0 else 0.0,
            "mean_absolute_error": report.mean_absolute_error, "identical_system": same,
        })
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=BENCH_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    print(f"backend: {_backend.name()}", file=sys.stderr)
    return 0 if all(r["identical_system"] for r in rows) else 3


def build_parser():
    parser = argparse.ArgumentParser(prog="blockrbf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="Halton points with Franke values")
    p.add_argument("--count", type=int, default=1089)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("fit", help="fit a model and report its error")
    _add_fit_args(p)
    p.add_argument("--block-size", type=int, default=None, metavar="M_B",
                   help="override the planner's block width")
    p.add_argument("--out", required=True, help="model file (JSON)")
    p.add_argument("--errors", help="write 'x y h f signed_error' rows here")
    p.add_argument("--report", help="also write the JSON report here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate a model at points")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True, help="'x y' or 'x y h' rows")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-blocks", help="time the fit for several block sizes")
    _add_fit_args(p)
    p.add_argument("--block-sizes", type=_parse_sizes, required=True, metavar="B1,B2,...")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_bench_blocks)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "gen-synthetic" and args.count < 1:
        parser.error("--count must be >= 1")
    try:
        return args.func(args)
    except (OSError, ValueError, ArithmeticError) as err:
        print(f"blockrbf: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
