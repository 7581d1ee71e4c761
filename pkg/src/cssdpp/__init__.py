"""Column subset selection with determinantal point processes.

Samplers, exact enumeration oracles, closed-form bounds and a generator of
matrices with prescribed spectrum and k-leverage scores.
"""
from .errors import (
    CapacityError,
    ConsistencyError,
    CssDppError,
    InfeasibleError,
    InputError,
    InvariantViolation,
    RankError,
    RejectionBudgetError,
    SingularityError,
)
from .linalg import (
    DataMatrix,
    KLeverageProfile,
    SubsetSelection,
    SvdBundle,
    best_rank_k_error,
    compute_svd,
    effective_sparsity,
    elementary_symmetric,
    flatness_beta,
    frobenius_projection_residual,
    k_leverage_scores,
    principal_angles,
    spanned_volume,
    tangent_trace,
)
from .matrixgen import dirichlet_leverage_profile, matrix_generator, toy_matrix
from .oracle import enumerate_law, exact_expected_error
from .rng import RngState
from .samplers import SelectorKind, select, select_many

__version__ = "0.1.0"
