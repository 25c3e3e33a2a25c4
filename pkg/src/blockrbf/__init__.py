"""Least-squares surface fitting with compactly supported radial basis functions.

The normal equations are assembled block by block from sparse sub-matrices so
the working set stays inside a fixed memory budget.
"""
from .data import PointCloud, center_cloud, franke, halton_points, load_xyz, synthetic_cloud, uniform_grid_refs
from .kernels import Family, KernelSpec, evaluate
from .model import ErrorReport, error_report, evaluate_model
from .solver import (BlockPlan, Model, NormalSystem, build_normal_system, choose_block_size, fit,
                     load_model, save_model, solve_weights)
from .spatial import PointIndex
from .sparse import CooMatrix, coo_gram_block, coo_matvec, coo_transpose_matvec

__version__ = "0.1.0"

__all__ = [
    "BlockPlan", "CooMatrix", "ErrorReport", "Family", "KernelSpec", "Model", "NormalSystem",
    "PointCloud", "PointIndex", "build_normal_system", "center_cloud", "choose_block_size",
    "coo_gram_block", "coo_matvec", "coo_transpose_matvec", "error_report", "evaluate",
    "evaluate_model", "fit", "franke", "halton_points", "load_model", "load_xyz", "save_model",
    "solve_weights", "synthetic_cloud", "uniform_grid_refs",
]
