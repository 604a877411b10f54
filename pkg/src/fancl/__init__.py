"""Fast nonconvex low-rank matrix learning.

Proximal gradient solvers for matrix completion and robust PCA with
nonconvex spectral penalties (capped-l1, LSP, TNN, SCAD, MCP) and the
nuclear norm, built on a warm-started power method, a reduced proximal
step and sparse-plus-low-rank iterate maps.
"""

from .gsvt import gsvt_full, gsvt_reduced, project_svd
from .linalg import (
    DenseOperator,
    LowRankFactors,
    SparseCoo,
    SplrMatrix,
    basis_deflate,
    frob_norm_diff_lowrank,
    power_method,
    qr_orthonormalize,
    splr_mul_left,
    splr_mul_right,
)
from .problems import CompletionProblem, RpcaProblem, mc_iterate_splr, mc_objective, rpca_block_objectives
from .regularizers import (
    KINDS,
    RegularizerSpec,
    matrix_penalty,
    penalty,
    penalty_sum,
    prox_values,
    scalar_prox,
    scalar_prox_oracle,
    threshold_gamma,
)
from .solver import (
    RunReport,
    SolverConfig,
    SolverError,
    continuation,
    fancl_rpca_solve,
    fancl_solve,
    reference_solve,
    soft_threshold_matrix,
    sufficient_decrease,
)

__version__ = "0.1.0"
