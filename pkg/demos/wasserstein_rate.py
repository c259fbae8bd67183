"""
How fast the plug-in latent law converges
=========================================

A small Monte Carlo study: for growing n, fit the coefficients, project the
covariates, and measure the 1-Wasserstein distance to a large sample from
the true latent law. The slope on a log-log scale should be close to -1/2.
"""

from unlinked_deconv.experiments import ExperimentConfig, run_rate_study

cfg = ExperimentConfig(setting="a", n_list=(250, 500, 1000, 2000), reps=10, reference_size=50_000,
                       n_starts=2, master_seed=3)
result = run_rate_study(cfg)

for n, (m1, m2, m3), q in zip(result.ns, result.moments, result.quantiles):
    print(f"n={n:5d}  mean W1={m1:.4f}  E W1^2={m2:.5f}  E W1^3={m3:.6f}  q0.99={q:.4f}")
for name, slope in result.slopes.items():
    print(f"slope of {name:6s} {slope:+.3f}")
