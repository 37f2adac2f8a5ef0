"""Post-estimation smoothing of precomputed predictions along index variables.

Any model's predictions can be post-processed here: build a kernel-weighted
averaging matrix over the index variables (time, position, wavelength, ...),
mix it with the identity, and apply it to the stored predictions.  The
diagnostics module estimates when that helps and by how much; the tuning
module picks the kernel width and mixing weight on a validation split; the
simulate module reproduces the latent smooth-signal study; the baselines
module provides reference regressors for comparison.
"""

from .data import (
    CovarianceBundle,
    IndexedDataset,
    PredictionSet,
    SplitAssignment,
    empirical_cross_correlation,
    residuals,
)
from .smoothing import (
    MAX_CONDITION_NUMBER,
    SmootherSpec,
    WeightMatrix,
    apply_smoother,
    gaussian_kernel,
    nadaraya_watson_matrix,
    optimal_smoother,
    pairwise_sq_dists,
    shrinkage_smoother,
    smooth_predictions,
)
from .diagnostics import (
    GammaBeta,
    beta_upper_bound,
    estimate_gamma_beta,
    expected_mse_reduction,
    mse_change_upper_bound,
    optimal_mixing_weight,
    smoothing_gap,
)
from .tuning import (
    DEFAULT_C_GRID,
    DEFAULT_SIGMA_GRID,
    BaselineTuneReport,
    GridSpec,
    TuneReport,
    mse,
    r_squared,
    tune_baseline,
    tune_pes,
)
from .baselines import (
    METHODS,
    BaselineSpec,
    default_grid,
    fit_and_predict,
    fit_gpr_mean,
    fit_hem,
    fit_laprls,
    fit_random_features,
    fit_ridge,
    shrink_to_mean,
)
from .simulate import (
    BlockCovariance,
    RbfCovariance,
    SimConfig,
    SimResult,
    asymptotic_mse,
    closed_form_optimal_smoother,
    covariance_factor,
    draw_trial,
    fit_coefficient,
    hidden_covariance,
    index_grid,
    model_covariance_bundle,
    ols_coefficient,
    run_sweep,
    tls_coefficient,
    trial_rng,
    write_sweep_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineSpec",
    "BaselineTuneReport",
    "BlockCovariance",
    "CovarianceBundle",
    "DEFAULT_C_GRID",
    "DEFAULT_SIGMA_GRID",
    "GammaBeta",
    "GridSpec",
    "IndexedDataset",
    "MAX_CONDITION_NUMBER",
    "METHODS",
    "PredictionSet",
    "RbfCovariance",
    "SimConfig",
    "SimResult",
    "SmootherSpec",
    "SplitAssignment",
    "TuneReport",
    "WeightMatrix",
    "apply_smoother",
    "asymptotic_mse",
    "beta_upper_bound",
    "closed_form_optimal_smoother",
    "covariance_factor",
    "default_grid",
    "draw_trial",
    "empirical_cross_correlation",
    "estimate_gamma_beta",
    "expected_mse_reduction",
    "fit_and_predict",
    "fit_coefficient",
    "fit_gpr_mean",
    "fit_hem",
    "fit_laprls",
    "fit_random_features",
    "fit_ridge",
    "gaussian_kernel",
    "hidden_covariance",
    "index_grid",
    "model_covariance_bundle",
    "mse",
    "mse_change_upper_bound",
    "nadaraya_watson_matrix",
    "ols_coefficient",
    "optimal_mixing_weight",
    "optimal_smoother",
    "pairwise_sq_dists",
    "r_squared",
    "residuals",
    "run_sweep",
    "shrink_to_mean",
    "shrinkage_smoother",
    "smooth_predictions",
    "smoothing_gap",
    "tls_coefficient",
    "trial_rng",
    "tune_baseline",
    "tune_pes",
    "write_sweep_csv",
]
