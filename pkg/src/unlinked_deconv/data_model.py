"""Core types for unlinked linear models and the four simulation settings.

The model is ``Y = beta0' X + eps`` where the covariate sample and the response
sample are observed without the link between them. Everything here is
immutable; random draws take an explicit seed (anything accepted by
:func:`numpy.random.default_rng`, including a ``SeedSequence``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special, stats

SETTINGS = ("a", "b", "c", "d")

# (shape, scale) per covariate for the Gamma settings
_GAMMA_PARAMS = {
    "c": ((1.0, 1.0), (2.0, 4.0)),
    "d": ((1.0, 1.0), (2.0, 4.0), (1.5, 3.0)),
}

TRUE_BETA = {
    "a": np.array([3.0, -5.0]),
    "b": np.array([-1.5, 2.0, 7.0]),
    "c": np.array([1.0, 2.0]),
    "d": np.array([0.5, 2.0, 3.0]),
}

DIMENSION = {key: value.size for key, value in TRUE_BETA.items()}


def _check_setting(setting: str) -> str:
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}; expected one of {SETTINGS}")
    return setting


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    """An unlinked covariate sample (n x d) and response sample (n,).

    ``linked`` records whether row ``i`` of the covariates generated
    ``responses[i]``; fitting never relies on it.
    """

    covariates: np.ndarray
    responses: np.ndarray
    setting_tag: str | None = None
    sigma: float | None = None
    seed: int | None = None
    linked: bool = False

    def __post_init__(self):
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.responses, dtype=float).ravel()
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"covariates must be a non-empty n x d matrix, got shape {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise ValueError(
                f"covariate sample has n={x.shape[0]} rows but response sample has "
                f"m={y.shape[0]} entries; only m == n is supported"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        if self.setting_tag not in (None, "custom") + SETTINGS:
            raise ValueError(f"invalid setting tag {self.setting_tag!r}")
        object.__setattr__(self, "covariates", _frozen(x))
        object.__setattr__(self, "responses", _frozen(y))

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]


class NoiseModel:
    """Known noise law of ``eps``.

    Built either from a frozen ``scipy.stats`` distribution via
    :meth:`from_scipy` or as the :class:`GaussianNoise` subclass, which the
    criterion recognises for its fast path.
    """

    def __init__(self, dist, name: str = "custom"):
        self._dist = dist
        self.name = name

    @classmethod
    def from_scipy(cls, dist, name: str = "custom") -> "NoiseModel":
        return cls(dist, name)

    def cdf(self, x):
        return self._dist.cdf(x)

    def pdf(self, x):
        return self._dist.pdf(x)

    def log_pdf(self, x):
        return self._dist.logpdf(x)

    def sample(self, size=None, seed=None):
        return self._dist.rvs(size=size, random_state=np.random.default_rng(seed))

    @property
    def variance(self) -> float:
        return float(self._dist.var())

    @property
    def scale(self) -> float:
        """Typical width used for grids; the standard deviation."""
        return math.sqrt(self.variance)

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


class GaussianNoise(NoiseModel):
    def __init__(self, sigma: float):
        sigma = float(sigma)
        if not sigma > 0:
            raise ValueError(f"noise standard deviation must be positive, got {sigma}")
        self.sigma = sigma
        super().__init__(stats.norm(scale=sigma), name=f"gaussian(sigma={sigma:g})")

    # closed forms are faster than going through scipy.stats
    def cdf(self, x):
        return special.ndtr(np.asarray(x, dtype=float) / self.sigma)

    def pdf(self, x):
        x = np.asarray(x, dtype=float) / self.sigma
        return np.exp(-0.5 * x * x) / (self.sigma * math.sqrt(2 * math.pi))

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float) / self.sigma
        return -0.5 * x * x - math.log(self.sigma) - 0.5 * math.log(2 * math.pi)

    def sample(self, size=None, seed=None):
        return self.sigma * np.random.default_rng(seed).standard_normal(size)

    @property
    def variance(self) -> float:
        return self.sigma**2


@dataclass(frozen=True)
class EmpiricalDist:
    """Uniform-weight empirical measure on the real line, atoms kept sorted."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.sort(np.asarray(self.atoms, dtype=float).ravel())
        if atoms.size < 1:
            raise ValueError("empirical distribution needs at least one atom")
        object.__setattr__(self, "atoms", _frozen(atoms))

    @property
    def n(self) -> int:
        return self.atoms.size

    def __len__(self):
        return self.atoms.size

    def cdf(self, x):
        """Right-continuous CDF, the fraction of atoms <= x."""
        return np.searchsorted(self.atoms, x, side="right") / self.n

    def quantile(self, q):
        """Left-continuous inverse CDF: the order statistic of rank ceil(n q)."""
        q = np.asarray(q, dtype=float)
        if np.any((q < 0) | (q > 1)):
            raise ValueError("quantile levels must lie in [0, 1]")
        return self.atoms[order_statistic_index(self.n, q)]

    def mean(self) -> float:
        return float(self.atoms.mean())

    def std(self) -> float:
        return float(self.atoms.std(ddof=1)) if self.n > 1 else 0.0


def order_statistic_index(n: int, q):
    """Zero-based index of the rank-``ceil(n q)`` order statistic (at least 1)."""
    # the small offset keeps exact products such as 500 * 0.99 from rounding up
    rank = np.ceil(np.asarray(q, dtype=float) * n - 1e-9).astype(int)
    return np.clip(rank, 1, n) - 1


GAUSSIAN_LIPSCHITZ = 1.0 / math.sqrt(2 * math.pi * math.e)


@dataclass(frozen=True)
class KernelSpec:
    shape: str = "gaussian"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.shape not in ("gaussian", "epanechnikov"):
            raise ValueError(f"unknown kernel shape {self.shape!r}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")

    def log_kernel(self, u):
        """Log of the unscaled kernel K(u)."""
        u = np.asarray(u, dtype=float)
        if self.shape == "gaussian":
            return -0.5 * u * u - 0.5 * math.log(2 * math.pi)
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(0.75 * (1.0 - u * u), 0.0))

    def kernel(self, u):
        return np.exp(self.log_kernel(u))

    def scaled(self, z):
        """K_h(z) = K(z / h) / h."""
        return self.kernel(np.asarray(z, dtype=float) / self.bandwidth) / self.bandwidth

    @property
    def second_moment(self) -> float:
        return 1.0 if self.shape == "gaussian" else 0.2

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant of the unscaled kernel."""
        return GAUSSIAN_LIPSCHITZ if self.shape == "gaussian" else 1.5

    @property
    def reach(self) -> float:
        """Half-width (in bandwidth units) beyond which the kernel is negligible."""
        return 8.0 if self.shape == "gaussian" else 1.0


def latent_sampler(setting: str) -> Callable[[int, object], np.ndarray]:
    """Exact sampler ``(m, seed) -> draws`` for the law of ``beta0' X``."""
    _check_setting(setting)
    beta = TRUE_BETA[setting]
    if setting in ("a", "b"):
        sd = float(np.linalg.norm(beta))

        def sample(m, seed=None):
            return sd * np.random.default_rng(seed).standard_normal(m)

    else:
        params = _GAMMA_PARAMS[setting]

        def sample(m, seed=None):
            rng = np.random.default_rng(seed)
            out = np.zeros(m)
            for b, (shape, scale) in zip(beta, params):
                out += b * rng.gamma(shape, scale, size=m)
            return out

    return sample


def latent_variance(setting: str) -> float:
    beta = TRUE_BETA[_check_setting(setting)]
    if setting in ("a", "b"):
        return float(beta @ beta)
    return float(sum(b * b * k * s * s for b, (k, s) in zip(beta, _GAMMA_PARAMS[setting])))


def _draw_covariates(setting: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if setting in ("a", "b"):
        return rng.standard_normal((n, DIMENSION[setting]))
    return np.column_stack([rng.gamma(k, s, size=n) for k, s in _GAMMA_PARAMS[setting]])


def sample_setting(setting: str, n: int, sigma: float, seed=None, linked: bool = False) -> Dataset:
    """Draw a synthetic dataset from one of the settings ``a``-``d``.

    Responses are generated from the same rows as the covariates and then
    shuffled unless ``linked`` is true. ``sigma = 0`` gives noiseless responses.
    """
    _check_setting(setting)
    if n < 1:
        raise ValueError("n must be at least 1")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.default_rng(seed)
    x = _draw_covariates(setting, n, rng)
    y = x @ TRUE_BETA[setting] + sigma * rng.standard_normal(n)
    if not linked:
        y = rng.permutation(y)
    return Dataset(
        x,
        y,
        setting_tag=setting,
        sigma=float(sigma),
        seed=seed if isinstance(seed, (int, np.integer)) else None,
        linked=linked,
    )


def sample_test_pairs(setting: str, size: int, sigma: float, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Linked (z, y) pairs with ``z ~ beta0' X`` and ``y = z + eps``."""
    rng = np.random.default_rng(seed)
    z = latent_sampler(setting)(size, rng)
    return z, z + sigma * rng.standard_normal(size)


def project(covariates, beta) -> EmpiricalDist:
    """Empirical law of ``beta' X_i``."""
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.ndim != 1 or beta.size != x.shape[1]:
        raise ValueError(f"beta has {beta.size} entries but covariates have {x.shape[1]} columns")
    return EmpiricalDist(x @ beta)


def draw_plugin(dist: EmpiricalDist, seed=None, size=None):
    """Uniform draw(s) from the atoms, i.e. the plug-in latent predictor."""
    if dist is None or dist.n == 0:
        raise ValueError("cannot draw from an empty distribution")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, dist.n, size=size)
    return float(dist.atoms[idx]) if size is None else dist.atoms[idx]


def warn_degenerate(dataset: Dataset) -> list[str]:
    """Diagnostics for constant covariate columns or constant responses."""
    notes = []
    if dataset.n > 1:
        constant = np.flatnonzero(np.ptp(dataset.covariates, axis=0) == 0)
        if constant.size:
            notes.append(f"constant covariate column(s) {constant.tolist()}")
        if np.ptp(dataset.responses) == 0:
            notes.append("responses have zero variance")
    for note in notes:
        warnings.warn(note, RuntimeWarning, stacklevel=3)
    return notes
