"""Hybrid, selective, simultaneous, naive and split-sample confidence
intervals for a regression coefficient of interest after lasso selection of
control variables, with a Monte Carlo study harness and dataset pipeline."""

from .ci import (ALL_METHODS, AnalysisReport, ConfidenceInterval, analyze,
                 hysi_ci, naive_ci, selective_ci, split_sample_ci)
from .covariance import (CovarianceEstimates, ModelUniverse,
                         build_universe_covariance, influence_vector,
                         sigma_dt, sigma_t_entry, t_statistic)
from .errors import (DegeneratePredictor, DegenerateTruncation,
                     DimensionMismatch, EmptyTruncation, HysiError,
                     InvalidGamma, MissingColumn, NoConvergence,
                     NonFiniteEvaluation, ParseError, SingularGram,
                     UniverseTooLarge)
from .lasso import (Dataset, SelectedModel, Standardization, check_kkt,
                    partial_out, solve_lasso)
from .numerics import (RngStream, TruncatedNormalSpec, invert_monotone,
                       sample, std_normal_cdf, std_normal_logcdf,
                       std_normal_quantile, truncated_normal_cdf)
from .posi import PosiConstant, posi_constant, posi_constants, posi_interval
from .selection import (SelectionEvent, TruncationTriple, build_event,
                        decorrelated_statistic, truncation_triple)
from .simulation import (RepOutcome, SimulationConfig, StudyResult,
                         generate_design, generate_response, run_study,
                         true_target)

__version__ = "0.1.0"
