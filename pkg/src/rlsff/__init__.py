"""Recursive least squares with forgetting factor for multiple-output systems."""

from .batch import History, batch_minimize, objective, objective_gradient
from .convergence import (
    ConvergenceCertificate,
    build_certificate,
    c_matrix_residual,
    gamma,
    lyapunov_difference,
    lyapunov_value,
    p_inv_lower_bound,
    verify_decay,
    verify_error_bound,
    verify_p_inv_bound,
)
from .errors import (
    InvalidConfigurationError,
    InvalidInputError,
    NumericalDegeneracyError,
    RankDeficiencyError,
    RLSError,
)
from .estimator import (
    EstimatorConfig,
    EstimatorState,
    Sample,
    StepReport,
    error_transition,
    init,
    predict,
    run_samples,
    step,
)
from .excitation import PEReport, min_window_for_pe, pe_analyze
from .simulation import ScenarioSpec, Trace, generate, run

__version__ = "0.1.0"
