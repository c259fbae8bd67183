"""
Conditional versus unconditional prediction
===========================================

Repeats the fit-and-predict cycle on fresh datasets and compares the
conditional estimators against the plain mean and mode of the estimated
latent law, on linked test pairs (z, y).
"""

from unlinked_deconv.experiments import ExperimentConfig, run_comparison

cfg = ExperimentConfig(setting="a", n_list=(500,), reps=10, test_size=100, n_starts=2, master_seed=5)
(result,) = run_comparison(cfg)

print(f"MSE conditional mean   {result.mse_cond_mean:.3f}   unconditional {result.mse_unc_mean:.3f}")
print(f"MSE conditional mode   {result.mse_cond_mode:.3f}   unconditional {result.mse_unc_mode:.3f}")
print(f"ratio mean / mode      {result.R_mean:.4f} / {result.R_mode:.4f}")
print(f"coverage of 95% sets   {result.coverage_conditional:.3f} (conditional), "
      f"{result.coverage_unconditional:.3f} (unconditional)")
print(f"interval length ratio  {result.length_ratio:.3f}")
