import math

import numpy as np
import pytest

from conftest import random_ctx
from unlinked_deconv.criterion import CriterionContext, dn_criterion
from unlinked_deconv.data_model import TRUE_BETA, Dataset, GaussianNoise, sample_setting
from unlinked_deconv.dlse import FitOptions, dist_to_solution_set, fit_dlse
from unlinked_deconv.wasserstein import loglinear_slope


def _ctx(setting, n, sigma, seed, linked=False):
    data = sample_setting(setting, n, sigma, seed=seed, linked=linked)
    return CriterionContext(data, GaussianNoise(sigma))


def test_identifiable_gamma_setting():
    fit = fit_dlse(_ctx("c", 2000, 0.05, seed=3), seed=0)
    assert np.linalg.norm(fit.beta_hat - np.array([1.0, 2.0])) <= 0.15


def test_gaussian_setting_recovers_norm_only():
    fit = fit_dlse(_ctx("a", 2000, 1.0, seed=4), seed=0)
    assert abs(np.linalg.norm(fit.beta_hat) - math.sqrt(34)) <= 0.25


def test_one_dimensional_gamma():
    rng = np.random.default_rng(8)
    x = rng.gamma(2.0, 4.0, size=(2000, 1))
    y = rng.permutation(2 * x[:, 0] + rng.standard_normal(2000))
    fit = fit_dlse(CriterionContext(Dataset(x, y, sigma=1.0), GaussianNoise(1.0)), seed=1)
    assert abs(fit.beta_hat[0] - 2.0) <= 0.2


def test_fit_result_invariants():
    ctx = _ctx("a", 300, 1.0, seed=2, linked=True)
    opts = FitOptions(n_starts=5)
    fit = fit_dlse(ctx, opts, seed=9)
    assert fit.starts_tried == 5 == len(fit.starts)
    assert abs(fit.criterion_value - dn_criterion(ctx, fit.beta_hat)) <= 1e-12
    values = [r.value for r in fit.starts]
    assert fit.starts[fit.best_start_index].value == min(values)
    assert fit.best_start_index == values.index(min(values))
    assert fit.criterion_value <= dn_criterion(ctx, TRUE_BETA["a"]) + opts.f_tol
    again = fit_dlse(ctx, opts, seed=9)
    assert again.beta_hat.tobytes() == fit.beta_hat.tobytes()
    assert set(fit.to_dict()) >= {"beta_hat", "criterion_value", "converged", "starts_tried", "best_start_index"}


def test_gradient_polish_does_not_worsen():
    ctx = random_ctx(150, seed=6)
    plain = fit_dlse(ctx, FitOptions(n_starts=3), seed=2)
    polished = fit_dlse(ctx, FitOptions(n_starts=3, refine_with_gradient=True), seed=2)
    assert polished.criterion_value <= plain.criterion_value + 1e-15


def test_options_validation_and_preconditions():
    with pytest.raises(ValueError):
        FitOptions(n_starts=0)
    with pytest.raises(ValueError):
        FitOptions(f_tol=0)
    with pytest.raises(ValueError):
        FitOptions(init_scale_rule="other")
    ctx = CriterionContext(Dataset(np.ones((1, 2)), np.ones(1), sigma=1.0), GaussianNoise(1.0))
    with pytest.raises(ValueError):
        fit_dlse(ctx)


def test_degenerate_data_is_reported():
    x = np.column_stack([np.ones(30), np.linspace(-1, 1, 30)])
    ctx = CriterionContext(Dataset(x, np.linspace(0, 2, 30), sigma=1.0), GaussianNoise(1.0))
    fit = fit_dlse(ctx, FitOptions(n_starts=2), seed=0)
    assert any("constant" in w for w in fit.warnings)
    assert np.all(np.isfinite(fit.beta_hat))


def test_distance_to_solution_set():
    assert dist_to_solution_set([math.sqrt(34), 0.0], "a") == pytest.approx(0.0, abs=1e-15)
    assert dist_to_solution_set([1.0, 2.0], "c") == 0.0
    assert dist_to_solution_set([0.0, 0.0], "a") == pytest.approx(5.8310, abs=1e-4)
    with pytest.raises(ValueError):
        dist_to_solution_set([0.0, 0.0], "z")


def test_distance_rate_across_n(rate_study_a):
    # median sqrt(n) * distance stays bounded; the log-median slope is near -1/2
    ns = (500, 1000, 2000)
    medians = [float(np.median(rate_study_a.values(n, "dist"))) for n in ns]
    scaled = [m * math.sqrt(n) for m, n in zip(medians, ns)]
    assert max(scaled) <= 2.0 * min(scaled)
    assert abs(loglinear_slope(ns, medians) + 0.5) <= 0.15
