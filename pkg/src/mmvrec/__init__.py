"""Jointly sparse recovery and activity detection for MIMO grant-free access."""

from .amp import AmpConfig, solve_amp
from .complexmat import ComplexMatrix, complex_matmul, load_cmat, save_cmat
from .cov_lasso import build_system, solve_cov_lasso, solve_nn_lasso
from .errors import (
    ContractViolation,
    DivergenceError,
    EvaluationError,
    MatrixFormatError,
    MatrixIOError,
    MatrixTruncatedError,
    MatrixValueError,
    NonConvergenceError,
)
from .group_lasso import AdmmConfig, solve_group_lasso
from .harness import (
    ExperimentConfig,
    ExperimentRecord,
    ScenarioConfig,
    SolverSpec,
    emit_results,
    import_matrix,
    run_sweep,
)
from .map_detect import MapConfig, empirical_covariance, mmse_given_support, solve_map
from .metrics import (
    calibrate_threshold,
    coherence_metrics,
    error_rate,
    hard_threshold,
    mse,
)
from .sampling import (
    IidGroupActivity,
    IndependentTwoGroup,
    ProblemInstance,
    SingleActiveGroup,
    derive_seed,
    draw_signal,
    draw_support,
    gaussian_pilots,
    make_instance,
    measure,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
