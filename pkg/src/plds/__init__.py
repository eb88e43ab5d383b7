"""Switching linear dynamical systems: simulation, tracking, and learning.

The model family couples a discrete mode chain with a conditionally linear
Gaussian state space.  This package provides exact enumeration for short
sequences, a structured variational smoother and streaming filter, a
two-frame mode-bank filter/smoother, a static mixture baseline, and a
benchmark harness comparing all of them.
"""

from .bench import (METHOD_REGISTRY, REPORT_COLUMNS, BenchmarkResult,
                    MethodRun, MetricsRow, render_report, report_csv_lines,
                    run_benchmark, run_method, score_runs)
from .enumeration import ExactPosterior, enumerate_posterior
from .errors import (BadConfigError, DegenerateResponsibilitiesError,
                     DimensionMismatchError, EmptyMixtureError,
                     EnumerationTooLargeError, InvalidModelError,
                     LengthMismatchError, MissingLatentsError,
                     NotSingleModeError, NumericalFailure, PLDSError,
                     SingularMatrixError, UnknownMethodError,
                     ValidationFailure)
from .estimators import StaticMixtureRegressor, SwitchingTracker
from .gaussians import Gaussian, GaussianMixture, collapse_moments, moment_match
from .gpb2 import (GPB2Belief, GPB2FilterResult, GPB2FilterSession,
                   GPB2LearnResult, GPB2SmoothResult, gpb2_filter, gpb2_learn,
                   gpb2_smooth, gpb2_step)
from .kalman import (KalmanBelief, SmoothedBelief, kalman_filter, rts_smoother)
from .metrics import (align_modes, confusion_matrix, mae, mode_accuracy,
                      per_dimension_mae, rmse, std_abs_error,
                      summarize_errors)
from .params import (DynamicParams, StaticParams, default_dynamics,
                     load_model, model_from_dict, model_to_dict,
                     require_valid, save_model, validate)
from .sequences import (Sequence, TrainingSet, read_posterior_csv,
                        read_sequence_csv, read_training_csv,
                        write_posterior_csv, write_sequence_csv,
                        write_training_csv)
from .simulate import (complete_log_likelihood, sample_sequence,
                       sample_static_pairs)
from .static_em import (InversePredictor, SelectKResult, StaticFitResult,
                        count_static_parameters, fit_static, predict_inverse,
                        select_k, static_loglik)
from .synthetic import (GeneratorSpec, corrupt_sequence, corrupt_with_outliers,
                        make_dataset, make_model)
from .variational import (FilterResult, VariationalFilterSession, VEMConfig,
                          VEMResult, VariationalPosterior, e_x_step, e_z_step,
                          elbo, m_step, m_step_from_stats, m_step_stats,
                          run_variational_filter, run_vem_smoother,
                          variational_smooth)

__version__ = "0.1.0"

__all__ = [
    "METHOD_REGISTRY",
    "REPORT_COLUMNS",
    "BadConfigError",
    "BenchmarkResult",
    "DegenerateResponsibilitiesError",
    "DimensionMismatchError",
    "DynamicParams",
    "EmptyMixtureError",
    "EnumerationTooLargeError",
    "ExactPosterior",
    "FilterResult",
    "GPB2Belief",
    "GPB2FilterResult",
    "GPB2FilterSession",
    "GPB2LearnResult",
    "GPB2SmoothResult",
    "Gaussian",
    "GaussianMixture",
    "GeneratorSpec",
    "InvalidModelError",
    "InversePredictor",
    "KalmanBelief",
    "LengthMismatchError",
    "MethodRun",
    "MetricsRow",
    "MissingLatentsError",
    "NotSingleModeError",
    "NumericalFailure",
    "PLDSError",
    "SelectKResult",
    "Sequence",
    "SingularMatrixError",
    "SmoothedBelief",
    "StaticFitResult",
    "StaticMixtureRegressor",
    "StaticParams",
    "SwitchingTracker",
    "TrainingSet",
    "UnknownMethodError",
    "VEMConfig",
    "VEMResult",
    "ValidationFailure",
    "VariationalFilterSession",
    "VariationalPosterior",
    "align_modes",
    "collapse_moments",
    "complete_log_likelihood",
    "confusion_matrix",
    "corrupt_sequence",
    "corrupt_with_outliers",
    "count_static_parameters",
    "default_dynamics",
    "e_x_step",
    "e_z_step",
    "elbo",
    "enumerate_posterior",
    "fit_static",
    "gpb2_filter",
    "gpb2_learn",
    "gpb2_smooth",
    "gpb2_step",
    "kalman_filter",
    "load_model",
    "m_step",
    "m_step_from_stats",
    "m_step_stats",
    "mae",
    "make_dataset",
    "make_model",
    "mode_accuracy",
    "model_from_dict",
    "model_to_dict",
    "moment_match",
    "per_dimension_mae",
    "predict_inverse",
    "read_posterior_csv",
    "read_sequence_csv",
    "read_training_csv",
    "render_report",
    "report_csv_lines",
    "require_valid",
    "rmse",
    "rts_smoother",
    "run_benchmark",
    "run_method",
    "run_variational_filter",
    "run_vem_smoother",
    "sample_sequence",
    "sample_static_pairs",
    "save_model",
    "score_runs",
    "select_k",
    "static_loglik",
    "std_abs_error",
    "summarize_errors",
    "validate",
    "variational_smooth",
    "write_posterior_csv",
    "write_sequence_csv",
    "write_training_csv",
]
