"""Inference on the latent predictor given an observed response.

By Bayes' rule the conditional density of Z given Y = y0 is proportional to
``f_eps(y0 - z) f_Z(z)``. The estimated version plugs in a KDE for ``f_Z`` and
one of the response-density estimators for the normaliser. Point estimates,
quantiles and credible intervals are computed on a grid that is refined
around the bulk of the conditional mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize

from .data_model import EmpiricalDist, NoiseModel
from .density import DensityEstimate, fy_empirical, fy_gauss_conv

FY_VARIANTS = ("empirical", "gauss_conv", "integrated")
GRID_NODES = 4096
LOG_FLOOR = -745.0
# log-density drop below the peak beyond which mass is ignored when gridding
_TAIL_DROP = 40.0
_NORMALIZER_FLOOR = 1e-300
MIN_ESS = 50


class OutsideSupportError(ValueError):
    """The estimated response density at y0 is numerically zero."""


class DegenerateSampleError(RuntimeError):
    """Importance sampling failed to reach the minimum effective sample size."""


class Interval(NamedTuple):
    lo: float
    hi: float
    method: str = "quadrature"

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def __contains__(self, z) -> bool:
        return self.lo <= z <= self.hi


@dataclass(frozen=True)
class ConditionalDensity:
    """Estimated density of Z given Y = y0, tabulated on ``grid``."""

    y0: float
    fz: DensityEstimate
    noise: NoiseModel
    fy_variant: str
    log_normalizer: float
    grid: np.ndarray
    log_unnormalized_grid: np.ndarray

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_normalizer)

    @property
    def support_hint(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def unnormalized_log(self, z):
        """``log f_eps(y0 - z) + log f_Z(z)``."""
        return self.noise.log_pdf(self.y0 - np.asarray(z, dtype=float)) + self.fz.log_evaluate(z)

    def log_pdf(self, z):
        return self.unnormalized_log(z) - self.log_normalizer

    def pdf(self, z):
        return np.exp(np.maximum(self.log_pdf(z), LOG_FLOOR))

    def pdf_grid(self) -> np.ndarray:
        return np.exp(np.maximum(self.log_unnormalized_grid - self.log_normalizer, LOG_FLOOR))

    def mass(self) -> float:
        return float(integrate.trapezoid(self.pdf_grid(), self.grid))

    def cdf_grid(self) -> np.ndarray:
        """Cumulative trapezoid of the density on the grid, rescaled to end at 1."""
        cum = integrate.cumulative_trapezoid(self.pdf_grid(), self.grid, initial=0.0)
        return cum / cum[-1]

    def cdf(self, z):
        return np.interp(z, self.grid, self.cdf_grid())


def _log_trapezoid(log_values: np.ndarray, grid: np.ndarray) -> float:
    peak = np.max(log_values)
    if not np.isfinite(peak):
        return -math.inf
    return float(peak + math.log(integrate.trapezoid(np.exp(log_values - peak), grid)))


def _bulk_grid(unnormalized_log, lo: float, hi: float, nodes: int = GRID_NODES):
    """Scan [lo, hi], then re-grid the region within ``_TAIL_DROP`` of the peak."""
    coarse = np.linspace(lo, hi, nodes)
    values = unnormalized_log(coarse)
    peak = np.max(values)
    if not np.isfinite(peak):
        return coarse, values
    inside = np.flatnonzero(values > peak - _TAIL_DROP)
    a = coarse[max(inside[0] - 1, 0)]
    b = coarse[min(inside[-1] + 1, nodes - 1)]
    fine = np.linspace(a, b, nodes)
    return fine, unnormalized_log(fine)


def _log_fy(fz: DensityEstimate, noise: NoiseModel, y0: float, variant: str) -> float:
    if variant == "empirical":
        if fz.atoms is None:
            raise ValueError("the empirical response density needs a KDE built from atoms")
        return float(fy_empirical(fz.atoms, noise).log_evaluate(y0))
    if variant == "gauss_conv":
        if fz.atoms is None or fz.kernel is None:
            raise ValueError("the Gaussian-convolution response density needs a KDE")
        return float(fy_gauss_conv(fz.atoms, fz.kernel, noise).log_evaluate(y0))
    raise ValueError(f"unknown fy variant {variant!r}; expected one of {FY_VARIANTS}")


def conditional_density(
    fz: DensityEstimate,
    noise: NoiseModel,
    y0: float,
    fy_variant: str = "integrated",
    fy: DensityEstimate | None = None,
    grid: np.ndarray | None = None,
    log_fz_grid: np.ndarray | None = None,
) -> ConditionalDensity:
    """Estimated conditional density ``f_eps(y0 - z) f_Z(z) / f_Y(y0)``.

    With ``fy_variant="integrated"`` the normaliser is the quadrature mass of
    the numerator, so the result integrates to one. An explicit ``fy`` overrides
    the variant. ``grid`` with matching ``log_fz_grid`` lets many responses
    share one tabulation of ``f_Z``.
    """
    if fy_variant not in FY_VARIANTS:
        raise ValueError(f"unknown fy variant {fy_variant!r}; expected one of {FY_VARIANTS}")
    y0 = float(y0)

    def unnormalized(z):
        return noise.log_pdf(y0 - z) + fz.log_evaluate(z)

    if grid is None:
        grid, values = _bulk_grid(unnormalized, *fz.support_hint)
    else:
        values = noise.log_pdf(y0 - grid) + (fz.log_evaluate(grid) if log_fz_grid is None else log_fz_grid)

    if fy is not None:
        log_norm = float(fy.log_evaluate(y0))
    elif fy_variant == "integrated":
        log_norm = _log_trapezoid(values, grid)
    else:
        log_norm = _log_fy(fz, noise, y0, fy_variant)
    if not log_norm > math.log(_NORMALIZER_FLOOR):
        raise OutsideSupportError(f"response {y0:g} lies outside the estimated support")
    grid = np.asarray(grid, dtype=float)
    grid.setflags(write=False)
    values = np.asarray(values, dtype=float)
    values.setflags(write=False)
    return ConditionalDensity(y0, fz, noise, fy_variant, log_norm, grid, values)


def cond_mode(cd: ConditionalDensity) -> float:
    """Maximiser of ``f_eps(y0 - z) f_Z(z)``: grid scan, then a bounded
    scalar search inside the neighbouring grid cells."""
    return _refine_argmax(cd.unnormalized_log, cd.grid, cd.log_unnormalized_grid)


def _refine_argmax(log_fn, grid, values) -> float:
    k = int(np.argmax(values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    if hi <= lo:
        return float(grid[k])
    tol = 1e-8 * (grid[-1] - grid[0])
    res = optimize.minimize_scalar(
        lambda z: -float(log_fn(z)), bounds=(lo, hi), method="bounded", options={"xatol": tol}
    )
    return float(res.x) if -res.fun >= values[k] else float(grid[k])


def cond_quantile(cd: ConditionalDensity, p: float) -> float:
    """Smallest z whose conditional CDF reaches ``p``; linear within a cell."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    cdf = cd.cdf_grid()
    k = int(np.searchsorted(cdf, p, side="left"))
    k = min(max(k, 1), cdf.size - 1)
    f0, f1 = cdf[k - 1], cdf[k]
    z0, z1 = cd.grid[k - 1], cd.grid[k]
    if f1 <= f0:
        return float(z1)
    return float(z0 + (p - f0) / (f1 - f0) * (z1 - z0))


@dataclass(frozen=True)
class ImportanceSample:
    draws: np.ndarray
    weights: np.ndarray  # self-normalised
    ess: float
    proposal: tuple[float, float]

    @property
    def mean(self) -> float:
        return float(self.weights @ self.draws)

    @property
    def stderr(self) -> float:
        return float(np.sqrt(np.sum(self.weights**2 * (self.draws - self.mean) ** 2)))

    def quantile(self, p: float) -> float:
        order = np.argsort(self.draws)
        cum = np.cumsum(self.weights[order])
        k = min(int(np.searchsorted(cum, p, side="left")), cum.size - 1)
        return float(self.draws[order][k])


def _laplace_scale(cd: ConditionalDensity, center: float) -> float:
    step = max(cd.grid[1] - cd.grid[0], 1e-6 * (cd.grid[-1] - cd.grid[0]))
    vals = cd.unnormalized_log(np.array([center - step, center, center + step]))
    curvature = (vals[0] - 2 * vals[1] + vals[2]) / step**2
    if np.isfinite(curvature) and curvature < 0:
        return 1.0 / math.sqrt(-curvature)
    pdf = cd.pdf_grid()
    w = pdf / pdf.sum()
    mean = w @ cd.grid
    return float(math.sqrt(max(w @ (cd.grid - mean) ** 2, step**2)))


def importance_sample(cd: ConditionalDensity, n: int = 100_000, seed=None) -> ImportanceSample:
    """Self-normalised importance sample with a Gaussian proposal centred at
    the grid argmax and twice the Laplace scale; the scale is inflated four-fold
    once if the effective sample size falls below ``MIN_ESS``."""
    rng = np.random.default_rng(seed)
    center = float(cd.grid[int(np.argmax(cd.log_unnormalized_grid))])
    scale = 2.0 * _laplace_scale(cd, center)
    for attempt in range(2):
        draws = center + scale * rng.standard_normal(n)
        log_q = -0.5 * ((draws - center) / scale) ** 2 - math.log(scale)
        with np.errstate(invalid="ignore"):
            log_w = cd.unnormalized_log(draws) - log_q
        log_w = np.where(np.isfinite(log_w), log_w, -np.inf)
        w = np.exp(log_w - np.max(log_w))
        w /= w.sum()
        ess = float(1.0 / np.sum(w**2))
        if ess >= MIN_ESS:
            return ImportanceSample(draws, w, ess, (center, scale))
        scale *= 4.0
    raise DegenerateSampleError(f"effective sample size {ess:.1f} below {MIN_ESS} at y0={cd.y0:g}")


def cond_mean(cd: ConditionalDensity, method: str = "quadrature", n_is: int = 100_000, seed=None) -> float:
    """``int z f(z | y0) dz`` by trapezoid on the grid or by importance sampling."""
    if method == "quadrature":
        pdf = cd.pdf_grid()
        return float(integrate.trapezoid(cd.grid * pdf, cd.grid))
    if method == "importance_sampling":
        return importance_sample(cd, n_is, seed).mean
    raise ValueError(f"unknown method {method!r}")


def credible_interval(
    cd: ConditionalDensity, alpha: float = 0.05, method: str = "quadrature", n_is: int = 100_000, seed=None
) -> Interval:
    """Equal-tailed interval between the ``alpha/2`` and ``1 - alpha/2`` quantiles."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if method == "quadrature":
        return Interval(cond_quantile(cd, alpha / 2), cond_quantile(cd, 1 - alpha / 2), method)
    if method == "importance_sampling":
        sample = importance_sample(cd, n_is, seed)
        return Interval(sample.quantile(alpha / 2), sample.quantile(1 - alpha / 2), method)
    raise ValueError(f"unknown method {method!r}")


class Baselines(NamedTuple):
    mean: float
    mode: float
    interval: Interval


def density_mode(fz: DensityEstimate, nodes: int = GRID_NODES) -> float:
    grid = np.linspace(*fz.support_hint, nodes)
    return _refine_argmax(fz.log_evaluate, grid, fz.log_evaluate(grid))


def unconditional_baselines(atoms: EmpiricalDist, fz: DensityEstimate, alpha: float = 0.05) -> Baselines:
    """Mean of the atoms, mode of ``fz``, and the interval between the order
    statistics of rank ``ceil(n alpha/2)`` and ``ceil(n (1 - alpha/2))``."""
    lo, hi = atoms.quantile([alpha / 2, 1 - alpha / 2])
    return Baselines(atoms.mean(), density_mode(fz), Interval(float(lo), float(hi), "empirical"))


class InferenceRow(NamedTuple):
    y0: float
    mean: float
    mode: float
    lo: float
    hi: float
    flagged: bool


def shared_grid(fz: DensityEstimate, noise: NoiseModel) -> np.ndarray:
    """Grid over ``fz.support_hint`` fine enough to resolve any conditional
    density built from ``fz`` and ``noise``."""
    lo, hi = fz.support_hint
    spacing = min(fz.resolution, noise.scale) / 16
    nodes = int(min(1 << 18, max(GRID_NODES, math.ceil((hi - lo) / spacing) + 1)))
    return np.linspace(lo, hi, nodes)


def infer_batch(
    fz: DensityEstimate,
    noise: NoiseModel,
    y0s,
    alpha: float = 0.05,
    fy_variant: str = "integrated",
    method: str = "quadrature",
    n_is: int = 100_000,
    seed=None,
) -> list[InferenceRow]:
    """Mean, mode and credible interval for each response in ``y0s``.

    ``f_Z`` is tabulated once on a shared grid. A response whose conditional
    bulk spans too few shared nodes gets its own refined grid; one outside the
    estimated support yields a flagged row of NaNs.
    """
    grid = shared_grid(fz, noise)
    log_fz = fz.log_evaluate(grid)
    seeds = np.random.SeedSequence(seed).spawn(len(y0s)) if method != "quadrature" else [None] * len(y0s)
    rows = []
    for y0, child in zip(np.asarray(y0s, dtype=float), seeds):
        try:
            cd = conditional_density(fz, noise, y0, fy_variant, grid=grid, log_fz_grid=log_fz)
            if np.count_nonzero(cd.log_unnormalized_grid > np.max(cd.log_unnormalized_grid) - _TAIL_DROP) < 256:
                cd = conditional_density(fz, noise, y0, fy_variant)
            mean = cond_mean(cd, method, n_is, child)
            ci = credible_interval(cd, alpha, method, n_is, child)
            rows.append(InferenceRow(float(y0), mean, cond_mode(cd), ci.lo, ci.hi, False))
        except (OutsideSupportError, DegenerateSampleError):
            rows.append(InferenceRow(float(y0), math.nan, math.nan, math.nan, math.nan, True))
    return rows

