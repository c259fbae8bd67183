import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import integrate, stats

from unlinked_deconv.data_model import (
    Dataset,
    EmpiricalDist,
    GaussianNoise,
    KernelSpec,
    NoiseModel,
    TRUE_BETA,
    draw_plugin,
    latent_sampler,
    latent_variance,
    order_statistic_index,
    project,
    sample_setting,
    sample_test_pairs,
    warn_degenerate,
)
from unlinked_deconv.wasserstein import w1_empirical


def test_setting_a_linked_residuals_are_standard_normal():
    data = sample_setting("a", 5, 1.0, seed=42, linked=True)
    assert data.d == 2 and data.n == 5
    resid = data.responses - (3 * data.covariates[:, 0] - 5 * data.covariates[:, 1])
    # same draws regenerated by hand
    rng = np.random.default_rng(42)
    rng.standard_normal((5, 2))
    assert_allclose(resid, rng.standard_normal(5), rtol=0, atol=1e-12)
    big = sample_setting("a", 20_000, 1.0, seed=3, linked=True)
    r = big.responses - big.covariates @ TRUE_BETA["a"]
    assert stats.kstest(r, "norm").pvalue > 1e-3


def test_gamma_covariates_nonnegative():
    data = sample_setting("c", 100, 1.0, seed=1)
    assert np.all(data.covariates >= 0)
    assert data.d == 2
    assert sample_setting("d", 10, 1.0, seed=1).d == 3


def test_zero_noise_linked_is_exact():
    data = sample_setting("a", 100, 0.0, seed=7, linked=True)
    assert_array_equal(data.responses, data.covariates @ np.array([3.0, -5.0]))


def test_unlinked_is_a_permutation_of_linked():
    a = sample_setting("b", 50, 1.0, seed=5, linked=True)
    b = sample_setting("b", 50, 1.0, seed=5, linked=False)
    assert_array_equal(a.covariates, b.covariates)
    assert_array_equal(np.sort(a.responses), np.sort(b.responses))
    assert not np.array_equal(a.responses, b.responses)


def test_sampling_reproducible():
    a = sample_setting("d", 30, 0.5, seed=11)
    b = sample_setting("d", 30, 0.5, seed=11)
    assert a.covariates.tobytes() == b.covariates.tobytes()
    assert a.responses.tobytes() == b.responses.tobytes()


def test_unknown_setting_rejected():
    with pytest.raises(ValueError):
        sample_setting("e", 10, 1.0)


def test_dataset_validation():
    with pytest.raises(ValueError, match="m=3"):
        Dataset(np.ones((4, 2)), np.ones(3))
    with pytest.raises(ValueError):
        Dataset(np.array([[1.0, np.nan]]), np.ones(1))
    data = Dataset(np.ones((2, 1)), np.zeros(2))
    with pytest.raises(ValueError):
        data.covariates[0, 0] = 5.0


def test_latent_laws():
    assert latent_variance("a") == 34.0
    assert latent_variance("b") == pytest.approx(55.25)
    # Gamma(k, s) has variance k s^2
    assert latent_variance("c") == pytest.approx(1 + 4 * 2 * 16)
    draws = latent_sampler("c")(200_000, 0)
    assert draws.mean() == pytest.approx(1 * 1 + 2 * 8, rel=0.01)
    assert draws.var() == pytest.approx(latent_variance("c"), rel=0.02)
    z, y = sample_test_pairs("a", 1000, 1.0, seed=2)
    assert np.std(y - z) == pytest.approx(1.0, rel=0.1)


def test_gaussian_noise_model():
    noise = GaussianNoise(2.0)
    x = np.linspace(-30, 30, 2001)
    cdf = noise.cdf(x)
    assert np.all(np.diff(cdf) >= 0) and cdf[0] < 1e-40 and cdf[-1] == 1.0
    pts = noise.sample(1000, seed=0)
    assert_allclose(np.exp(noise.log_pdf(pts)), noise.pdf(pts), rtol=1e-12)
    val, _ = integrate.quad(noise.pdf, -20, 20, epsabs=1e-12)
    assert abs(val - 1) < 1e-8
    generic = NoiseModel.from_scipy(stats.norm(scale=2.0))
    assert_allclose(generic.cdf(x), cdf, atol=1e-15)
    assert generic.variance == pytest.approx(4.0)
    with pytest.raises(ValueError):
        GaussianNoise(0.0)


def test_empirical_dist_cdf_and_quantile():
    dist = EmpiricalDist([3.0, 1.0, 2.0, 5.0])
    assert_array_equal(dist.atoms, [1, 2, 3, 5])
    assert_allclose(dist.cdf(dist.atoms), [0.25, 0.5, 0.75, 1.0])
    assert dist.quantile(0.5) == 2.0
    assert order_statistic_index(500, 0.99) == 494  # the 495th order statistic
    with pytest.raises(ValueError):
        EmpiricalDist([])


def test_kernel_moments_and_lipschitz():
    for shape in ("gaussian", "epanechnikov"):
        k = KernelSpec(shape, 1.0)
        lim = 10 if shape == "gaussian" else 1
        mass, _ = integrate.quad(k.kernel, -lim, lim)
        first, _ = integrate.quad(lambda u: u * k.kernel(u), -lim, lim)
        second, _ = integrate.quad(lambda u: u * u * k.kernel(u), -lim, lim)
        assert mass == pytest.approx(1, abs=1e-10)
        assert abs(first) < 1e-12
        assert second == pytest.approx(k.second_moment, abs=1e-10)
    u = np.linspace(-6, 6, 200_001)
    g = KernelSpec("gaussian").kernel(u)
    slope = np.max(np.abs(np.diff(g) / np.diff(u)))
    assert slope == pytest.approx(1 / math.sqrt(2 * math.pi * math.e), rel=1e-6)
    h = KernelSpec("gaussian", 0.5)
    assert h.scaled(0.3) == pytest.approx(stats.norm.pdf(0.3, scale=0.5))
    with pytest.raises(ValueError):
        KernelSpec("gaussian", 0.0)


def test_project_examples():
    col = np.array([[2.0], [-1.0], [4.0]])
    assert_array_equal(project(col, [1.0]).atoms, [-1, 2, 4])
    assert_array_equal(project(np.ones((3, 2)), [0.0, 0.0]).atoms, 0)
    assert_array_equal(project(np.eye(2), [3.0, -5.0]).atoms, [-5, 3])
    with pytest.raises(ValueError):
        project(np.eye(2), [1.0, 2.0, 3.0])


def test_project_positive_homogeneity():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((40, 3))
    beta = rng.standard_normal(3)
    assert_allclose(project(x, 2.5 * beta).atoms, 2.5 * project(x, beta).atoms, rtol=1e-14)


def test_rotation_invariance_of_gaussian_projection():
    n = 20_000
    data = sample_setting("a", n, 1.0, seed=4)
    beta0 = TRUE_BETA["a"]
    angle = 1.1
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    w = w1_empirical(project(data.covariates, beta0), project(data.covariates, rot @ beta0))
    assert w <= 3 * math.sqrt(34) / math.sqrt(n)


def test_draw_plugin():
    assert draw_plugin(EmpiricalDist([2.5]), seed=0) == 2.5
    draws = draw_plugin(EmpiricalDist([0.0, 1.0]), seed=1, size=1_000_000)
    assert abs(draws.mean() - 0.5) <= 0.002
    dist = EmpiricalDist([1.0, 4.0, 9.0])
    assert set(draw_plugin(dist, seed=2, size=100)) <= {1.0, 4.0, 9.0}
    with pytest.raises(ValueError):
        draw_plugin(None)


def test_degenerate_warnings():
    data = Dataset(np.column_stack([np.ones(5), np.arange(5.0)]), np.full(5, 2.0))
    with pytest.warns(RuntimeWarning):
        notes = warn_degenerate(data)
    assert len(notes) == 2
