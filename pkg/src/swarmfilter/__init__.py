"""swarmfilter: batch safety filtering of multi-robot trajectory proposals.

Samples (or ingests) batches of Bernstein-coefficient trajectory proposals
and projects each one onto the feasible set (endpoint conditions, workspace
containment, inter-robot clearance) via an alternating-minimization fixed
point with closed-form block updates.
"""
from .assembly import (
    EqualitySystem,
    PairwiseOperator,
    SphericalVars,
    ViolationReport,
    build_equality,
    build_pairwise_operator,
    build_spherical_rhs,
    check_original_constraints,
)
from .basis import (
    BasisMatrices,
    Trajectory,
    bernstein_matrices,
    build_basis,
    coeffs_to_trajectory,
)
from .errors import (
    DegreeTooLow,
    DimensionMismatch,
    EndpointCollision,
    GoalOutsideWorkspace,
    NonPositiveGeometry,
    ProblemValidationError,
    RankDeficient,
    SchemaMismatch,
    SingularKKT,
    StartOutsideWorkspace,
    SwarmFilterError,
    TooFewSamples,
)
from .metrics import (
    BatchReport,
    BenchmarkGrid,
    benchmark,
    build_batch_report,
    diversity_cosine,
    feasible_fraction,
    mean_pairwise_cosine,
    primal_residual,
)
from .problem import (
    EndpointState,
    RobotBoundary,
    RobotShape,
    SwarmProblem,
    Workspace,
    load_problem,
    pair_margin,
    validate_problem,
    workspace_margin,
)
from .projection import project_to_boundary
from .proposals import (
    ProposalBatch,
    WarmStart,
    load_proposals,
    load_warmstart,
    sample_proposals,
    save_proposals,
    save_warmstarts,
)
from .solver import (
    BatchResult,
    SafetyFilter,
    SolveResult,
    SolverConfig,
    batch_solve,
    coefficient_step,
    multiplier_update,
    solve,
    spherical_step,
)

__version__ = "0.1.0"

__all__ = [
    "BasisMatrices",
    "BatchReport",
    "BatchResult",
    "BenchmarkGrid",
    "DegreeTooLow",
    "DimensionMismatch",
    "EndpointCollision",
    "EndpointState",
    "EqualitySystem",
    "GoalOutsideWorkspace",
    "NonPositiveGeometry",
    "PairwiseOperator",
    "ProblemValidationError",
    "ProposalBatch",
    "RankDeficient",
    "RobotBoundary",
    "RobotShape",
    "SafetyFilter",
    "SchemaMismatch",
    "SingularKKT",
    "SolveResult",
    "SolverConfig",
    "SphericalVars",
    "StartOutsideWorkspace",
    "SwarmFilterError",
    "SwarmProblem",
    "TooFewSamples",
    "Trajectory",
    "ViolationReport",
    "WarmStart",
    "Workspace",
    "batch_solve",
    "bernstein_matrices",
    "benchmark",
    "build_basis",
    "build_batch_report",
    "build_equality",
    "build_pairwise_operator",
    "build_spherical_rhs",
    "check_original_constraints",
    "coefficient_step",
    "coeffs_to_trajectory",
    "diversity_cosine",
    "feasible_fraction",
    "load_problem",
    "load_proposals",
    "load_warmstart",
    "mean_pairwise_cosine",
    "multiplier_update",
    "pair_margin",
    "primal_residual",
    "project_to_boundary",
    "sample_proposals",
    "save_proposals",
    "save_warmstarts",
    "solve",
    "spherical_step",
    "validate_problem",
    "workspace_margin",
]
