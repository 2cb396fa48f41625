"""Data-driven multivariate rational approximation on tensor-product
grids: the greedy barycentric algorithm with a full SVD coefficient solve,
and its low-rank variant that constrains the coefficient tensor to a CP
decomposition fitted by alternating least squares."""

from .als import AlsConfig, AlsResult, als_solve, stopping_check, warm_start
from .barycentric import (
    BarycentricModel,
    PoleError,
    SampleGrid,
    evaluate,
    evaluate_grid,
    modified_cauchy,
    relative_linearized_ls_error,
    relative_ls_error,
    relative_max_error,
)
from .driver import FitConfig, FitReport, fit, greedy_select, trace_errors, update_nodes
from .io import load_grid, load_model, save_grid, save_model
from .loewner import (
    LoewnerContext,
    MemoryBudgetError,
    build_contracted,
    build_full,
    build_J,
    contracted_gram,
    gram_of_J,
)
from .models import BlockKSpec, MsdSpec, blockk_f, make_grid, msd_transfer, trig_f
from .solvers import (
    ConstrainedLsSolution,
    RankDeficiencyError,
    SolverError,
    solve_constrained,
    solve_full,
    truncate_rank,
)
from .tensor import (
    CPFactors,
    cp_frobenius_norm,
    khatri_rao,
    materialize_cp,
    mode_product,
    unvectorize,
    vectorize,
)

__version__ = "0.1.0"
