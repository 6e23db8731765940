"""Kernel-regularized FIR identification with EB, SURE and oracle hyperparameter criteria."""

from .asymptotics import (
    LimitSpec,
    RateResult,
    convergence_rate_experiment,
    limit_eta,
    shifted_criterion,
    w_b,
    w_g,
    w_y,
)
from ._inputs import generate_input, input_covariance
from .bench import ExperimentConfig, RunRecord, generate_test_system, run_experiment
from .criteria import (
    Criterion,
    CriterionKind,
    DerivedQuantities,
    criterion_grad_eta,
    criterion_grad_P,
    criterion_grad_P_rewritten,
    criterion_value,
    derived_quantities,
    surey_sureg_relation_check,
)
from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    IllConditionedError,
    InvalidKernelError,
    MissingTruthError,
    NonConvergenceError,
    RegKernError,
    UndefinedFitError,
)
from .hyperopt import (
    OptimizerConfig,
    closed_form_diagonal,
    closed_form_ridge,
    estimate_hyperparameter,
    optimal_unconstrained_kernel,
)
from .kernels import KernelSpec, default_omega, kernel_gradient, kernel_matrix
from .model import (
    Dataset,
    EstimateReport,
    SystemTruth,
    build_regressor,
    fit_metric,
    ls_estimate,
    mse_matrix,
    mseg_exact,
    msey_exact,
    noise_variance_estimate,
    regularization_gain_curve,
    rls_estimate,
)

__version__ = "0.1.0"
