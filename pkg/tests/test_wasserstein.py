import math

import numpy as np
import pytest
from scipy import stats

from unlinked_deconv.data_model import EmpiricalDist, latent_sampler
from unlinked_deconv.wasserstein import loglinear_slope, w1_cdf_integral, w1_empirical, w1_vs_reference


def test_examples():
    s = np.array([0.3, -1.2, 4.0])
    assert w1_empirical(s, s) == 0.0
    assert w1_empirical([0.0], [3.0]) == 3.0
    assert w1_empirical([0.0, 1.0], [0.0, 2.0]) == 0.5
    with pytest.raises(ValueError):
        w1_empirical([], [1.0])


def test_against_scipy_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.normal(size=rng.integers(1, 40))
        b = rng.gamma(2.0, size=rng.integers(1, 40))
        assert w1_empirical(a, b) == pytest.approx(stats.wasserstein_distance(a, b), abs=1e-12)


def test_accepts_empirical_dist():
    assert w1_empirical(EmpiricalDist([1.0, 2.0]), [1.0, 3.0]) == 0.5


def test_reference_sampler():
    atoms = latent_sampler("a")(5000, 11)
    assert w1_vs_reference(atoms, lambda m, seed: atoms[:m], m=5000) == 0.0
    far = w1_vs_reference(atoms, latent_sampler("a"), 1_000_000, seed=5)
    near = w1_vs_reference(atoms, latent_sampler("a"), 100_000, seed=5)
    assert far <= 0.35
    assert abs(far - near) <= 0.02
    with pytest.raises(ValueError):
        w1_vs_reference(atoms, latent_sampler("a"), 0)


def test_slope():
    ns = np.array([500, 1000, 2000, 4000])
    assert loglinear_slope(ns, 3 * ns**-0.5) == pytest.approx(-0.5, abs=1e-12)
    assert loglinear_slope(ns, np.full(4, 2.0)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        loglinear_slope(ns, [1.0, 0.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        loglinear_slope([1], [1.0])


def test_fast_path_equals_cdf_integral():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 200))
        a, b = rng.normal(size=n), rng.standard_cauchy(size=n)
        assert abs(w1_empirical(a, b) - w1_cdf_integral(a, b)) < 1e-12 * max(1.0, w1_empirical(a, b))


def test_metric_axioms():
    rng = np.random.default_rng(2)
    for _ in range(100):
        s, t, u = (rng.normal(rng.normal(), 1 + rng.random(), size=rng.integers(1, 30)) for _ in range(3))
        c, a = rng.normal(0, 5), rng.normal(0, 3)
        d_st = w1_empirical(s, t)
        assert d_st == w1_empirical(t, s)
        assert d_st <= w1_empirical(s, u) + w1_empirical(u, t) + 1e-12
        assert abs(w1_empirical(s + c, t + c) - d_st) < 1e-12 * max(1.0, abs(c))
        assert abs(w1_empirical(a * s, a * t) - abs(a) * d_st) < 1e-12 * max(1.0, abs(a) * d_st)


def test_gaussian_rate_order():
    # E W1 between an n-sample and its law shrinks like n^{-1/2}
    sampler = latent_sampler("a")
    vals = [np.mean([w1_vs_reference(sampler(n, s), sampler, 100_000, seed=100 + s) for s in range(20)])
            for n in (250, 1000, 4000)]
    assert -0.65 < loglinear_slope([250, 1000, 4000], vals) < -0.35
    assert vals[0] < 2 * math.sqrt(34) / math.sqrt(250)
