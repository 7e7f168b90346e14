"""Sparse bilinear recovery from entrywise products via l1-BranchHull."""

__version__ = "0.1.0"

from .admm import SolverConfig, admm_solve, preset_l1_bh, preset_rbh, preset_tv_bh, soft_threshold
from .dictionaries import bessel_dictionary, gaussian_dictionary, partial_idct_dictionary, tv_operator
from .model import (
    BilinearProblem,
    GroundTruth,
    SolutionTriple,
    balanced_scaling,
    recovery_distance,
    synthesize_measurements,
)
from .projection import project_block, project_point2, project_point3

__all__ = [
    "BilinearProblem",
    "GroundTruth",
    "SolutionTriple",
    "SolverConfig",
    "admm_solve",
    "balanced_scaling",
    "bessel_dictionary",
    "gaussian_dictionary",
    "partial_idct_dictionary",
    "preset_l1_bh",
    "preset_rbh",
    "preset_tv_bh",
    "project_block",
    "project_point2",
    "project_point3",
    "recovery_distance",
    "soft_threshold",
    "synthesize_measurements",
    "tv_operator",
]
