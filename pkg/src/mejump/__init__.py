"""Finite-state Markov jump process interpretation of matrix-exponential
distributions.

The pipeline: validate a parameter triple (alpha, T, s), sign-split it into
nonnegative pieces, assemble the doubled original/anti-state generator at a
tilting rate at least the subintensity threshold, simulate the terminating
jump process, and recover tilted and untilted densities and expectations by
signed Monte Carlo, cross-checked against exact matrix-analytic formulas.
"""

from .errors import (
    EigenConvergenceError,
    LambdaTooSmallError,
    MEJumpError,
    NotADensityError,
    NotTransientError,
    PositiveDiagonalError,
    SingularMatrixError,
    UnstableTError,
    ZeroAlphaError,
)
from .estimators import (
    DensityEstimate,
    ExpectationEstimate,
    Grid,
    HSpec,
    analytic_untilted_doubled,
    decay_cancellation_check,
    mc_density_beta,
    mc_density_qbar,
    mc_expectation_untilted,
    tilted_bin_averages,
)
from .jumpsim import (
    PathBatch,
    PathOutcome,
    RngStream,
    StateId,
    StateKind,
    sample_initial,
    simulate_batch,
    simulate_path,
)
from .linalg import mat_exp, solve_linear, spectral_abscissa
from .medist import MEParams, ValidationReport, density, laplace_transform, tilt, validate
from .models import exponential_model, phase_type_example, reference_model
from .splitting import (
    DoubledGenerator,
    ExitProfile,
    InitialSplit,
    SignSplit,
    build_generator,
    check_transience,
    doubled_matrix,
    doubled_signed_density,
    exit_profile,
    initial_split,
    lambda_zero,
    resolve_lambda,
    sign_split,
)

__version__ = "0.1.0"

__all__ = [
    "MEJumpError", "NotADensityError", "UnstableTError", "PositiveDiagonalError",
    "ZeroAlphaError", "LambdaTooSmallError", "NotTransientError",
    "SingularMatrixError", "EigenConvergenceError",
    "MEParams", "ValidationReport", "validate", "density", "laplace_transform", "tilt",
    "SignSplit", "InitialSplit", "ExitProfile", "DoubledGenerator",
    "sign_split", "lambda_zero", "initial_split", "build_generator",
    "doubled_matrix", "exit_profile", "check_transience", "resolve_lambda",
    "doubled_signed_density",
    "StateId", "StateKind", "PathOutcome", "PathBatch", "RngStream",
    "sample_initial", "simulate_path", "simulate_batch",
    "Grid", "DensityEstimate", "ExpectationEstimate", "HSpec",
    "mc_density_beta", "mc_density_qbar", "mc_expectation_untilted",
    "analytic_untilted_doubled", "decay_cancellation_check", "tilted_bin_averages",
    "mat_exp", "solve_linear", "spectral_abscissa",
    "reference_model", "exponential_model", "phase_type_example",
]
