"""Layered hypergraph beta-model: sampling, fitting, inference, testing.

The model places each size-s hyperedge independently with probability
``logistic(sum of the layer-s parameters of its vertices)``.  Degrees
per layer are the sufficient statistics, so every routine works from
degree sequences alone.
"""

from .core import (
    ArgumentError,
    BoundaryDegreeError,
    DegreeCovariance,
    ExperimentError,
    HyperbetaError,
    LayerSample,
    LayeredParams,
    NumericalError,
    chisq_quantile,
    derive_stream_seed,
    enumerate_subsets,
    log1p_exp,
    logistic,
    logit,
    make_rng,
    max_degree,
    normal_cdf,
    normal_quantile,
    substream,
)
from .estimator import (
    FitConfig,
    FitResult,
    existence_diagnostic,
    fit_all_layers,
    fit_layer,
)
from .experiments import (
    ExperimentSpec,
    render_figure,
    run_coverage,
    run_experiment,
    run_gamma_gap,
    run_null_calibration,
    run_power,
    run_qq,
    run_rate,
)
from .goftest import (
    SignalReport,
    TestReport,
    effective_signal,
    linf_test,
    lr_statistic,
    lr_test,
    power_from_eta,
)
from .inference import (
    ConfidenceReport,
    attach_stderr,
    confidence_set,
    plugin_sigma,
    standardize,
)
from .likelihood import (
    LikelihoodWorkspace,
    degree_covariance,
    expected_degrees,
    gamma_inverse_gap,
    gamma_surrogate,
    gradient,
    hessian_eigen_bounds,
    neg_log_likelihood,
)
from .sampler import (
    degrees_from_csv,
    degrees_to_csv,
    edge_probability,
    edges_to_csv,
    sample_layer,
    sample_layered,
)

__version__ = "0.1.0"
