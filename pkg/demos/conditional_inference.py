"""
Predicting the latent value behind one response
===============================================

After fitting, the density of Z = beta' X is estimated by a kernel density
estimate of the projected covariates. Bayes' rule with the known noise gives
the conditional density of Z given an observed response y0, from which we
read off the mean, mode and an equal-tailed credible interval.
"""

import numpy as np

from unlinked_deconv import (
    CriterionContext,
    GaussianNoise,
    cond_mean,
    cond_mode,
    conditional_density,
    credible_interval,
    fit_dlse,
    kde,
    project,
    sample_setting,
    unconditional_baselines,
)

data = sample_setting("a", n=500, sigma=1.0, seed=4)
noise = GaussianNoise(1.0)
fit = fit_dlse(CriterionContext(data, noise), seed=4)
atoms = project(data.covariates, fit.beta_hat)
fz = kde(atoms)

base = unconditional_baselines(atoms, fz)
print(f"ignoring y0: mean {base.mean:.3f}, mode {base.mode:.3f}, "
      f"95% interval [{base.interval.lo:.2f}, {base.interval.hi:.2f}]")

for y0 in (-10.0, 0.0, 6.0):
    cd = conditional_density(fz, noise, y0)
    ci = credible_interval(cd, 0.05)
    # under the true N(0, 34) latent law the answer would be y0 * 34 / 35
    print(f"y0={y0:+5.1f}: mean {cond_mean(cd):+.3f} (oracle {y0 * 34 / 35:+.3f}), "
          f"mode {cond_mode(cd):+.3f}, 95% interval [{ci.lo:+.2f}, {ci.hi:+.2f}], mass {cd.mass():.4f}")

# Self-normalised importance sampling gives the same answers up to Monte Carlo error.
cd = conditional_density(fz, noise, 6.0)
print("importance-sampling mean", cond_mean(cd, "importance_sampling", seed=0))
