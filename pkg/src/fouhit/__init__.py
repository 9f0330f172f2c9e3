"""Level-crossing tail bounds for the fractional Ornstein-Uhlenbeck
process, certified by exact Gaussian Monte Carlo simulation."""

from ._kernels import backend
from .bounds import (
    FULL_RANGE,
    HALF_RANGE,
    BoundCoefficients,
    DomainError,
    ModelConfig,
    SupremumBound,
    ThresholdError,
    borell_bound,
    canonical_metric,
    coefficients,
    covering_number,
    expected_sup_bound,
    fbm_sup_bound,
    moment_bound,
    sigma_bound_chain_ok,
    sigma_sq_bound,
    tail_bound,
    tail_bound_raw,
    variance_exact,
    variance_oracle,
    variance_upper,
)
from .experiments import (
    ConfigError,
    ExperimentReport,
    ExperimentSpec,
    MCEstimate,
    ReportRow,
    estimate_mean_sup,
    estimate_tail,
    estimate_variance_at,
    load_experiment_specs,
    report_to_csv,
    report_to_json,
    run_experiment,
    run_experiments,
)
from .quadrature import (
    QuadratureError,
    QuadratureSpec,
    integrate_1d,
    integrate_2d_triangle,
)
from .simulate import (
    CirculantEmbeddingError,
    FactorizationError,
    GaussianPath,
    PathBatch,
    SamplerConfig,
    TimeGrid,
    batch_sups,
    fbm_covariance,
    fbm_covariance_matrix,
    fou_from_fbm,
    hitting_indicator,
    path_sup,
    sample_fbm,
    subsample,
    substream_seed,
)

__version__ = "0.1.0"
