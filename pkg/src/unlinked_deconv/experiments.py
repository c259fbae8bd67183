"""Monte Carlo studies: Wasserstein rate, estimator comparison, MSE grid.

Replication ``r`` at sample size ``n`` and noise variance ``s2`` draws all of
its randomness from ``SeedSequence(master_seed, spawn_key=(setting, n, s2, r))``
so results do not depend on worker count or on how replications are split
between runs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .conditional import infer_batch, unconditional_baselines
from .criterion import CriterionContext
from .data_model import (
    DIMENSION,
    SETTINGS,
    GaussianNoise,
    KernelSpec,
    latent_sampler,
    project,
    sample_setting,
    sample_test_pairs,
)
from .density import kde
from .dlse import FitOptions, NonFiniteCriterionError, dist_to_solution_set, fit_dlse
from .wasserstein import loglinear_slope, w1_vs_reference

MAX_FAILURE_RATE = 0.01
MOMENT_ORDERS = (1, 2, 3)
RATE_QUANTILE = 0.99


@dataclass(frozen=True)
class ExperimentConfig:
    setting: str = "a"
    n_list: tuple[int, ...] = (500, 1000, 2000, 4000)
    sigma2_list: tuple[float, ...] = (1.0,)
    reps: int = 100
    test_size: int = 100
    reference_size: int = 100_000
    alpha: float = 0.05
    master_seed: int = 0
    fy_variant: str = "integrated"
    rep_offset: int = 0
    # optimizer budget per fit
    n_starts: int = 4
    x_tol: float = 1e-6
    f_tol: float = 1e-10
    # conditional inference
    method: str = "quadrature"
    n_is: int = 100_000
    bandwidth: float | None = None
    conditional_estimator: str = "bayes"
    workers: int = 1

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "sigma2_list", tuple(float(s) for s in self.sigma2_list))
        if self.reps < 1 or self.test_size < 1 or self.reference_size < 1:
            raise ValueError("reps, test_size and reference_size must be positive")
        if not self.n_list or min(self.n_list) < DIMENSION[self.setting]:
            raise ValueError(f"every n must be at least d={DIMENSION[self.setting]}")
        if not self.sigma2_list or min(self.sigma2_list) <= 0:
            raise ValueError("noise variances must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.conditional_estimator not in ("bayes", "unconditional"):
            raise ValueError(f"unknown conditional_estimator {self.conditional_estimator!r}")

    @property
    def fit_options(self) -> FitOptions:
        return FitOptions(n_starts=self.n_starts, x_tol=self.x_tol, f_tol=self.f_tol)

    @classmethod
    def preset(cls, experiment: str, scale: str = "desk", **overrides) -> "ExperimentConfig":
        """Defaults for ``rates``, ``comparison`` or ``mse-grid`` at ``desk`` or
        ``paper`` scale."""
        if scale not in ("desk", "paper"):
            raise ValueError(f"unknown scale {scale!r}")
        paper = scale == "paper"
        if experiment == "rates":
            base = dict(
                n_list=(1000, 2000, 3000, 4000, 5000) if paper else (500, 1000, 2000, 4000),
                reps=500 if paper else 100,
                reference_size=1_000_000 if paper else 100_000,
            )
        elif experiment == "comparison":
            base = dict(n_list=(50, 100, 500) if paper else (500,), reps=500 if paper else 100)
        elif experiment == "mse-grid":
            base = dict(
                n_list=(50, 100, 500) if paper else (500,),
                sigma2_list=(0.5, 1.0, 1.5, 2.0, 2.5) if paper else (1.0,),
                reps=500 if paper else 100,
            )
        else:
            raise ValueError(f"unknown experiment {experiment!r}")
        if paper:
            base.update(n_starts=8, x_tol=1e-8)
        base.update(overrides)
        return cls(**base)


def replication_stream(cfg: ExperimentConfig, n: int, sigma2: float, rep: int) -> np.random.SeedSequence:
    key = (SETTINGS.index(cfg.setting), int(n), int(round(sigma2 * 1e6)), int(rep))
    return np.random.SeedSequence(cfg.master_seed, spawn_key=key)


def _run_tasks(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def _rep_indices(cfg: ExperimentConfig):
    return range(cfg.rep_offset, cfg.rep_offset + cfg.reps)


def _fit(cfg: ExperimentConfig, n: int, sigma: float, stream):
    data_seed, fit_seed, aux_seed = stream.spawn(3)
    data = sample_setting(cfg.setting, n, sigma, seed=data_seed)
    ctx = CriterionContext(data, GaussianNoise(sigma))
    fit = fit_dlse(ctx, cfg.fit_options, seed=fit_seed)
    if not np.all(np.isfinite(fit.beta_hat)):
        raise NonFiniteCriterionError("optimizer returned a non-finite estimate")
    return data, fit, aux_seed


def mc_aggregate(values, k_list=MOMENT_ORDERS, q: float = RATE_QUANTILE) -> dict:
    """Raw moments ``mean(v^k)`` and the rank-``ceil(J q)`` order statistic."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot aggregate an empty set of replications")
    ordered = np.sort(values)
    rank = min(max(math.ceil(values.size * q - 1e-9), 1), values.size)
    return {"moments": {int(k): float(np.mean(values**k)) for k in k_list}, "quantile": float(ordered[rank - 1])}


def _check_failures(failed: int, total: int) -> None:
    if total and failed / total > MAX_FAILURE_RATE:
        raise RuntimeError(f"{failed} of {total} replications failed, above the {MAX_FAILURE_RATE:.0%} limit")


# ---------------------------------------------------------------------------
# rate study


def _rate_replication(task):
    cfg, n, rep = task
    sigma = math.sqrt(cfg.sigma2_list[0])
    try:
        data, fit, aux_seed = _fit(cfg, n, sigma, replication_stream(cfg, n, sigma**2, rep))
    except NonFiniteCriterionError:
        return None
    atoms = project(data.covariates, fit.beta_hat)
    w1 = w1_vs_reference(atoms, latent_sampler(cfg.setting), cfg.reference_size, aux_seed)
    return {
        "rep": rep,
        "w1": w1,
        "dist": dist_to_solution_set(fit.beta_hat, cfg.setting),
        "criterion": fit.criterion_value,
        "converged": fit.converged,
    }


@dataclass(frozen=True)
class RateStudyResult:
    setting: str
    ns: tuple[int, ...]
    records: dict  # n -> list of per-replication dicts ordered by rep
    failures: dict = field(default_factory=dict)

    def values(self, n: int, key: str = "w1") -> np.ndarray:
        return np.array([r[key] for r in self.records[n]])

    @property
    def moments(self) -> np.ndarray:
        """Array of shape (len(ns), 3) with the raw W1 moments of order 1..3."""
        return np.array([[mc_aggregate(self.values(n))["moments"][k] for k in MOMENT_ORDERS] for n in self.ns])

    @property
    def quantiles(self) -> np.ndarray:
        return np.array([mc_aggregate(self.values(n))["quantile"] for n in self.ns])

    @property
    def slopes(self) -> dict:
        out = {f"W1^{k}": loglinear_slope(self.ns, self.moments[:, i]) for i, k in enumerate(MOMENT_ORDERS)}
        out["q0.99"] = loglinear_slope(self.ns, self.quantiles)
        return out

    def merge(self, other: "RateStudyResult") -> "RateStudyResult":
        if other.setting != self.setting or other.ns != self.ns:
            raise ValueError("can only merge rate studies over the same setting and sample sizes")
        records = {n: sorted(self.records[n] + other.records[n], key=lambda r: r["rep"]) for n in self.ns}
        failures = {n: self.failures.get(n, 0) + other.failures.get(n, 0) for n in self.ns}
        return RateStudyResult(self.setting, self.ns, records, failures)

    def tidy_rows(self) -> list[tuple]:
        rows = []
        moments, quantiles = self.moments, self.quantiles
        for i, n in enumerate(self.ns):
            for j, k in enumerate(MOMENT_ORDERS):
                rows.append((self.setting, n, 1.0, f"W1^{k}", moments[i, j]))
            rows.append((self.setting, n, 1.0, "q0.99", quantiles[i]))
            rows.append((self.setting, n, 1.0, "median_dist", float(np.median(self.values(n, "dist")))))
            rows.append((self.setting, n, 1.0, "failures", self.failures.get(n, 0)))
        return rows


def run_rate_study(cfg: ExperimentConfig) -> RateStudyResult:
    """Fit, project and measure W1 to a large reference sample, for each n and
    replication; aggregate moments and the 99% quantile per n."""
    tasks = [(cfg, n, rep) for n in cfg.n_list for rep in _rep_indices(cfg)]
    outputs = _run_tasks(_rate_replication, tasks, cfg.workers)
    records = {n: [] for n in cfg.n_list}
    failures = {n: 0 for n in cfg.n_list}
    for (_, n, _), out in zip(tasks, outputs):
        if out is None:
            failures[n] += 1
        else:
            records[n].append(out)
    _check_failures(sum(failures.values()), len(tasks))
    return RateStudyResult(cfg.setting, cfg.n_list, records, failures)


# ---------------------------------------------------------------------------
# conditional-inference studies


def _inference_replication(task):
    cfg, n, sigma2, rep = task
    sigma = math.sqrt(sigma2)
    try:
        data, fit, aux_seed = _fit(cfg, n, sigma, replication_stream(cfg, n, sigma2, rep))
    except NonFiniteCriterionError:
        return None
    test_seed, is_seed = aux_seed.spawn(2)
    noise = GaussianNoise(sigma)
    atoms = project(data.covariates, fit.beta_hat)
    kernel = KernelSpec("gaussian", cfg.bandwidth) if cfg.bandwidth else None
    fz = kde(atoms, kernel)
    base = unconditional_baselines(atoms, fz, cfg.alpha)
    z, y = sample_test_pairs(cfg.setting, cfg.test_size, sigma, test_seed)
    rows = infer_batch(fz, noise, y, cfg.alpha, cfg.fy_variant, cfg.method, cfg.n_is, is_seed)
    ok = np.array([not r.flagged for r in rows])
    z = z[ok]
    mean = np.array([r.mean for r in rows])[ok]
    mode = np.array([r.mode for r in rows])[ok]
    lo = np.array([r.lo for r in rows])[ok]
    hi = np.array([r.hi for r in rows])[ok]
    if cfg.conditional_estimator == "unconditional":
        mean = np.full(z.size, base.mean)
        mode = np.full(z.size, base.mode)
        lo = np.full(z.size, base.interval.lo)
        hi = np.full(z.size, base.interval.hi)
    return {
        "rep": rep,
        "mse_cond_mean": float(np.mean((mean - z) ** 2)),
        "mse_cond_mode": float(np.mean((mode - z) ** 2)),
        "mse_unc_mean": float(np.mean((base.mean - z) ** 2)),
        "mse_unc_mode": float(np.mean((base.mode - z) ** 2)),
        "cover_cond": float(np.mean((lo <= z) & (z <= hi))),
        "cover_unc": float(np.mean((base.interval.lo <= z) & (z <= base.interval.hi))),
        "len_cond": float(np.mean(hi - lo)),
        "len_unc": base.interval.length,
        "flagged": int(np.count_nonzero(~ok)),
    }


def _inference_cell(cfg: ExperimentConfig, n: int, sigma2: float):
    tasks = [(cfg, n, sigma2, rep) for rep in _rep_indices(cfg)]
    outputs = _run_tasks(_inference_replication, tasks, cfg.workers)
    records = [out for out in outputs if out is not None]
    return records, len(tasks) - len(records)


def _mean_of(records, key):
    return float(np.mean([r[key] for r in records]))


@dataclass(frozen=True)
class ComparisonResult:
    setting: str
    n: int
    sigma2: float
    mse_cond_mean: float
    mse_cond_mode: float
    mse_unc_mean: float
    mse_unc_mode: float
    coverage_conditional: float
    coverage_unconditional: float
    mean_length_conditional: float
    mean_length_unconditional: float
    failures: int = 0
    flagged: int = 0

    @property
    def R_mean(self) -> float:
        return self.mse_cond_mean / self.mse_unc_mean

    @property
    def R_mode(self) -> float:
        return self.mse_cond_mode / self.mse_unc_mode

    @property
    def length_ratio(self) -> float:
        return self.mean_length_conditional / self.mean_length_unconditional

    def tidy_rows(self) -> list[tuple]:
        stats = dict(
            R_mean=self.R_mean,
            R_mode=self.R_mode,
            coverage_conditional=self.coverage_conditional,
            coverage_unconditional=self.coverage_unconditional,
            length_ratio=self.length_ratio,
            mse_cond_mean=self.mse_cond_mean,
            mse_cond_mode=self.mse_cond_mode,
            mse_unc_mean=self.mse_unc_mean,
            mse_unc_mode=self.mse_unc_mode,
            failures=self.failures,
            flagged=self.flagged,
        )
        return [(self.setting, self.n, self.sigma2, key, value) for key, value in stats.items()]


def run_comparison(cfg: ExperimentConfig) -> list[ComparisonResult]:
    """Conditional versus unconditional estimators for each n at the first
    noise variance in ``cfg.sigma2_list``."""
    sigma2 = cfg.sigma2_list[0]
    results = []
    for n in cfg.n_list:
        records, failed = _inference_cell(cfg, n, sigma2)
        _check_failures(failed, cfg.reps)
        results.append(
            ComparisonResult(
                cfg.setting,
                n,
                sigma2,
                mse_cond_mean=_mean_of(records, "mse_cond_mean"),
                mse_cond_mode=_mean_of(records, "mse_cond_mode"),
                mse_unc_mean=_mean_of(records, "mse_unc_mean"),
                mse_unc_mode=_mean_of(records, "mse_unc_mode"),
                coverage_conditional=_mean_of(records, "cover_cond"),
                coverage_unconditional=_mean_of(records, "cover_unc"),
                mean_length_conditional=_mean_of(records, "len_cond"),
                mean_length_unconditional=_mean_of(records, "len_unc"),
                failures=failed,
                flagged=sum(r["flagged"] for r in records),
            )
        )
    return results


@dataclass(frozen=True)
class MSEGridResult:
    setting: str
    ns: tuple[int, ...]
    sigma2s: tuple[float, ...]
    mean_mse: np.ndarray  # (len(ns), len(sigma2s))
    mode_mse: np.ndarray
    failures: int = 0

    def cell(self, n: int, sigma2: float) -> tuple[float, float]:
        i, j = self.ns.index(n), self.sigma2s.index(sigma2)
        return float(self.mean_mse[i, j]), float(self.mode_mse[i, j])

    def tidy_rows(self) -> list[tuple]:
        rows = []
        for i, n in enumerate(self.ns):
            for j, s2 in enumerate(self.sigma2s):
                rows.append((self.setting, n, s2, "mse_mean", float(self.mean_mse[i, j])))
                rows.append((self.setting, n, s2, "mse_mode", float(self.mode_mse[i, j])))
        return rows


def run_mse_grid(cfg: ExperimentConfig) -> MSEGridResult:
    """MSE of the conditional mean and mode over the (n, noise variance) grid."""
    mean_mse = np.empty((len(cfg.n_list), len(cfg.sigma2_list)))
    mode_mse = np.empty_like(mean_mse)
    failures = 0
    for i, n in enumerate(cfg.n_list):
        for j, s2 in enumerate(cfg.sigma2_list):
            records, failed = _inference_cell(cfg, n, s2)
            _check_failures(failed, cfg.reps)
            failures += failed
            mean_mse[i, j] = _mean_of(records, "mse_cond_mean")
            mode_mse[i, j] = _mean_of(records, "mse_cond_mode")
    return MSEGridResult(cfg.setting, cfg.n_list, cfg.sigma2_list, mean_mse, mode_mse, failures)


# ---------------------------------------------------------------------------
# output


TIDY_HEADER = ("setting", "n", "sigma2", "statistic", "value")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def tidy_csv(rows, header=TIDY_HEADER) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def slopes_csv(results: list[RateStudyResult]) -> str:
    """One row per setting with the four log-linear slopes."""
    header = ("setting", "W1^1", "W1^2", "W1^3", "q0.99")
    rows = [(r.setting, *(r.slopes[k] for k in header[1:])) for r in results]
    return tidy_csv(rows, header)


def config_summary(cfg: ExperimentConfig) -> dict:
    out = asdict(cfg)
    out.pop("workers")
    return out


def json_summary(cfg: ExperimentConfig, stats: dict) -> str:
    payload = {"config": config_summary(cfg), "results": stats}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"

