"""Deconvolution in unlinked linear models.

Covariates X and responses Y = beta^T X + eps are observed as two separate,
unpaired samples. The package estimates beta by matching the convolution of
the projected covariates with the known noise law to the empirical law of Y,
recovers the distribution of Z = beta^T X, and does conditional inference on
Z given an observed response.
"""

from .conditional import (
    ConditionalDensity,
    Interval,
    OutsideSupportError,
    cond_mean,
    cond_mode,
    cond_quantile,
    conditional_density,
    credible_interval,
    importance_sample,
    infer_batch,
    unconditional_baselines,
)
from .criterion import CriterionContext, conv_cdf, dn_criterion, dn_gradient, dn_value_and_gradient
from .data_model import (
    Dataset,
    EmpiricalDist,
    GaussianNoise,
    KernelSpec,
    NoiseModel,
    draw_plugin,
    latent_sampler,
    project,
    sample_setting,
    sample_test_pairs,
)
from .density import (
    DensityEstimate,
    default_bandwidth,
    fy_empirical,
    fy_gauss_conv,
    fy_integrated,
    kde,
    silverman_bandwidth,
)
from .dlse import FitOptions, FitResult, dist_to_solution_set, fit_dlse
from .experiments import ExperimentConfig, mc_aggregate, run_comparison, run_mse_grid, run_rate_study
from .wasserstein import loglinear_slope, w1_empirical, w1_vs_reference

__version__ = "0.1.0"
