"""Dictionary learning with lp-power sparsity penalties, plus the sample-
complexity machinery needed to certify how well an empirical fit generalizes:
computable Lipschitz constants, covering-number and concentration bounds, the
deviation bound eta(n, m, d, L), and a Monte Carlo harness that checks the
bound and its sqrt(log n / n) decay at desk scale.
"""

from .core import (
    TOL_BALL,
    TOL_UNIT,
    CoeffMatrix,
    Dictionary,
    Penalty,
    SignalSet,
    dict_distance,
    l1_bound_from_penalty,
    l1_factor,
    lp_norm,
    penalty_eval,
)
from .sparse_coding import (
    CodingResult,
    SolverConfig,
    batch_objective,
    brute_force_code,
    grid_resolution_error,
    is_eps_near_solution,
    objective,
    sparse_code,
)
from .learning import LearnConfig, LearnTrace, dict_update, learn, project_atoms
from .bounds import (
    BoundInputs,
    BoundReport,
    compute_beta,
    compute_eta,
    empirical_C,
    empirical_C_squared,
    empirical_L,
    full_report,
    hoeffding_tail,
    log_covering_number,
    log_covering_number_tight,
    proof_constants,
    required_samples,
    worst_case_L,
)
from .experiments import (
    DistributionSpec,
    ExperimentConfig,
    GapCurve,
    GapRow,
    estimate_expected_f,
    export,
    gap_sweep,
    load_curve,
    planted_dictionary,
    random_dictionary,
    sample,
)

__version__ = "0.1.0"

__all__ = [
    "TOL_BALL",
    "TOL_UNIT",
    "Penalty",
    "Dictionary",
    "SignalSet",
    "CoeffMatrix",
    "lp_norm",
    "penalty_eval",
    "l1_factor",
    "l1_bound_from_penalty",
    "dict_distance",
    "SolverConfig",
    "CodingResult",
    "objective",
    "sparse_code",
    "batch_objective",
    "brute_force_code",
    "is_eps_near_solution",
    "grid_resolution_error",
    "LearnConfig",
    "LearnTrace",
    "project_atoms",
    "dict_update",
    "learn",
    "BoundInputs",
    "BoundReport",
    "empirical_L",
    "empirical_C",
    "empirical_C_squared",
    "worst_case_L",
    "log_covering_number",
    "log_covering_number_tight",
    "hoeffding_tail",
    "compute_beta",
    "compute_eta",
    "proof_constants",
    "full_report",
    "required_samples",
    "DistributionSpec",
    "ExperimentConfig",
    "GapRow",
    "GapCurve",
    "sample",
    "random_dictionary",
    "planted_dictionary",
    "estimate_expected_f",
    "gap_sweep",
    "export",
    "load_curve",
    "__version__",
]
