"""Kernel density estimate of the latent predictor and three response-density
estimators built from it.

All evaluation happens on the log scale through log-sum-exp so that mixtures
of far-apart components neither underflow nor overflow.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .data_model import EmpiricalDist, GaussianNoise, KernelSpec, NoiseModel

# cells of the (points x components) matrix evaluated per chunk
_CHUNK_CELLS = 1_000_000
_MAX_NODES = 1 << 18


@dataclass(frozen=True)
class DensityEstimate:
    """A one-dimensional density known through its log.

    ``resolution`` is the narrowest feature width of the density (the
    bandwidth for a KDE); grids built on it use a spacing well below it.
    """

    log_fn: Callable[[np.ndarray], np.ndarray]
    support_hint: tuple[float, float]
    kind: str
    resolution: float
    atoms: EmpiricalDist | None = None
    kernel: KernelSpec | None = None
    noise: NoiseModel | None = None

    def log_evaluate(self, z):
        z_arr = np.asarray(z, dtype=float)
        out = self.log_fn(np.atleast_1d(z_arr).ravel())
        return float(out[0]) if z_arr.ndim == 0 else out.reshape(z_arr.shape)

    def evaluate(self, z):
        return np.exp(self.log_evaluate(z))

    __call__ = evaluate

    def grid(self, nodes: int = 2048) -> np.ndarray:
        lo, hi = self.support_hint
        return np.linspace(lo, hi, nodes)

    def integral(self, nodes: int | None = None) -> float:
        """Trapezoid integral over ``support_hint``."""
        lo, hi = self.support_hint
        if nodes is None:
            nodes = int(min(_MAX_NODES, max(2048, math.ceil(8 * (hi - lo) / self.resolution))))
        z = np.linspace(lo, hi, nodes)
        return float(integrate.trapezoid(self.evaluate(z), z))

    @classmethod
    def gaussian(cls, mean: float, sd: float) -> "DensityEstimate":
        """Exact normal density, used as an oracle stand-in for a KDE."""
        log_norm = math.log(sd) + 0.5 * math.log(2 * math.pi)

        def log_fn(z):
            u = (z - mean) / sd
            return -0.5 * u * u - log_norm

        return cls(log_fn, (mean - 12 * sd, mean + 12 * sd), "exact", sd)


def log_mixture(points: np.ndarray, centers: np.ndarray, log_component) -> np.ndarray:
    """``log((1/n) sum_i exp(log_component(points - centers_i)))`` per point."""
    points = np.asarray(points, dtype=float)
    out = np.empty(points.size)
    step = max(1, _CHUNK_CELLS // centers.size)
    log_n = math.log(centers.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        for start in range(0, points.size, step):
            block = log_component(points[start : start + step, None] - centers[None, :])
            out[start : start + step] = logsumexp(block, axis=1) - log_n
    return out


def default_bandwidth(atoms: EmpiricalDist) -> float:
    """``1.06 * sd * n^(-1/8)``."""
    if atoms.n < 2:
        raise ValueError("default bandwidth needs at least two atoms")
    sd = atoms.std()
    if sd <= 0:
        floor = 1e-6 * max(1.0, abs(atoms.mean()))
        warnings.warn(f"atoms have zero spread; using bandwidth floor {floor:g}", RuntimeWarning, stacklevel=2)
        return floor
    return 1.06 * sd * atoms.n ** (-1 / 8)


def silverman_bandwidth(atoms: EmpiricalDist) -> float:
    """Rule-of-thumb ``1.06 * sd * n^(-1/5)``, narrower than the default for
    large n; used where a KDE is compared against the unsmoothed mixture."""
    if atoms.n < 2 or atoms.std() <= 0:
        return default_bandwidth(atoms)
    return 1.06 * atoms.std() * atoms.n ** (-1 / 5)


def kde(atoms: EmpiricalDist, kernel: KernelSpec | None = None) -> DensityEstimate:
    """``f(z) = (1/n) sum_i K_h(z - atom_i)``; bandwidth defaults to
    :func:`default_bandwidth`."""
    if kernel is None:
        kernel = KernelSpec("gaussian", default_bandwidth(atoms))
    h = kernel.bandwidth
    centers = atoms.atoms
    log_h = math.log(h)

    def log_fn(z):
        return log_mixture(z, centers, lambda r: kernel.log_kernel(r / h) - log_h)

    pad = kernel.reach * h if kernel.shape == "epanechnikov" else 6 * h
    support = (float(centers[0] - pad), float(centers[-1] + pad))
    return DensityEstimate(log_fn, support, "kde", h, atoms=atoms, kernel=kernel)


def fy_empirical(atoms: EmpiricalDist, noise: NoiseModel) -> DensityEstimate:
    """``f_Y(y) = (1/n) sum_i f_eps(y - atom_i)``."""
    centers = atoms.atoms

    def log_fn(y):
        return log_mixture(y, centers, noise.log_pdf)

    pad = 6 * noise.scale
    support = (float(centers[0] - pad), float(centers[-1] + pad))
    return DensityEstimate(log_fn, support, "fy_empirical", noise.scale, atoms=atoms, noise=noise)


def fy_gauss_conv(atoms: EmpiricalDist, h, sigma) -> DensityEstimate:
    """Mixture of ``N(atom_i, h^2 + sigma^2)``: the exact convolution of a
    Gaussian-kernel KDE with Gaussian noise.

    ``h`` may be a bandwidth or a :class:`KernelSpec`; ``sigma`` may be a noise
    standard deviation or a :class:`NoiseModel`. Both must be Gaussian.
    """
    if isinstance(h, KernelSpec):
        if h.shape != "gaussian":
            raise ValueError("the closed-form convolution needs a Gaussian kernel")
        h = h.bandwidth
    if isinstance(sigma, NoiseModel):
        if not isinstance(sigma, GaussianNoise):
            raise ValueError("the closed-form convolution needs Gaussian noise")
        sigma = sigma.sigma
    if not (h > 0 and sigma > 0):
        raise ValueError("bandwidth and noise scale must be positive")
    scale = math.sqrt(h * h + sigma * sigma)
    noise = GaussianNoise(scale)
    centers = atoms.atoms

    def log_fn(y):
        return log_mixture(y, centers, noise.log_pdf)

    pad = 6 * (h + sigma)
    support = (float(centers[0] - pad), float(centers[-1] + pad))
    return DensityEstimate(log_fn, support, "fy_gauss_conv", scale, atoms=atoms, noise=noise)


def fy_integrated(fz: DensityEstimate, noise: NoiseModel, nodes: int = 2048) -> DensityEstimate:
    """``f_Y(y) = int f_eps(y - z) f_Z(z) dz`` by the composite trapezoid rule.

    The grid covers ``fz.support_hint`` widened by six noise scales, with at
    least ``nodes`` points and a spacing no coarser than a third of the
    narrower of the KDE bandwidth and the noise scale.
    """
    lo, hi = fz.support_hint
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("fy_integrated needs a finite support hint")
    pad = 6 * noise.scale
    lo, hi = lo - pad, hi + pad
    fine = min(fz.resolution, noise.scale) / 3
    count = int(min(_MAX_NODES, max(nodes, math.ceil((hi - lo) / fine) + 1)))
    z = np.linspace(lo, hi, count)
    weights = np.full(count, z[1] - z[0])
    weights[[0, -1]] *= 0.5
    log_base = fz.log_evaluate(z) + np.log(weights)
    keep = np.isfinite(log_base)
    z, log_base = z[keep], log_base[keep]

    def log_fn(y):
        out = np.empty(y.size)
        step = max(1, _CHUNK_CELLS // z.size)
        with np.errstate(divide="ignore"):
            for start in range(0, y.size, step):
                block = noise.log_pdf(y[start : start + step, None] - z[None, :]) + log_base
                out[start : start + step] = logsumexp(block, axis=1)
        if np.any(np.isnan(out)):
            raise FloatingPointError("non-finite quadrature in fy_integrated")
        return out

    return DensityEstimate(log_fn, (float(lo), float(hi)), "fy_integrated", noise.scale, atoms=fz.atoms, noise=noise)


def write_density_csv(path, density: DensityEstimate, grid=None) -> None:
    """Two-column CSV ``z,density`` on ``grid`` (default: 2048 points on the
    support hint). Values are written with ``repr`` so they round-trip."""
    grid = density.grid() if grid is None else np.asarray(grid, dtype=float)
    values = density.evaluate(grid)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["z", "density"])
        for z, f in zip(grid, values):
            writer.writerow([repr(float(z)), repr(float(f))])
