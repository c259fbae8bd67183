"""Deconvolution least-squares criterion and its gradient.

For a candidate coefficient vector ``beta`` the criterion compares the
empirical CDF of the responses with the convolution of the projected
covariates and the noise CDF, averaged over the observed responses::

    D_n(beta) = (1/n) sum_j (F_n^Y(Y_j) - C_{n,beta}(Y_j))^2
    C_{n,beta}(y) = (1/n) sum_i F_eps(y - beta' X_i)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import gaussian_conv_sums
from .data_model import Dataset, GaussianNoise, NoiseModel

# rows of the (query x atom) matrix processed at once on the generic path
_CHUNK_CELLS = 2_000_000


@dataclass(frozen=True)
class CriterionContext:
    """Dataset and noise law plus the sorted responses and their ECDF values.

    ``ecdf_values[j]`` is the fraction of responses ``<= sorted_responses[j]``
    so tied responses share the largest rank.
    """

    dataset: Dataset
    noise: NoiseModel
    sorted_responses: np.ndarray = field(init=False, repr=False)
    ecdf_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        y = np.sort(self.dataset.responses)
        f = np.searchsorted(y, y, side="right") / y.size
        y.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "sorted_responses", y)
        object.__setattr__(self, "ecdf_values", f)

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def d(self) -> int:
        return self.dataset.d


def _check_beta(ctx: CriterionContext, beta) -> np.ndarray:
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape != (ctx.d,):
        raise ValueError(f"beta must have {ctx.d} entries, got shape {beta.shape}")
    return beta


def _sorted_projection(ctx: CriterionContext, beta):
    atoms = ctx.dataset.covariates @ beta
    order = np.argsort(atoms, kind="stable")
    return atoms[order], np.ascontiguousarray(ctx.dataset.covariates[order])


def conv_sums(ctx: CriterionContext, beta, y_sorted, want_grad=False, method="auto"):
    """Convolution CDF values at sorted ``y`` and, optionally, the weighted
    density sums ``(1/n) sum_i f_eps(y - beta' X_i) X_i``.

    ``method="direct"`` forces the literal double sum; ``"auto"`` uses the
    compiled Gaussian kernel when the noise is Gaussian.
    """
    atoms, x = _sorted_projection(ctx, beta)
    if method == "auto" and isinstance(ctx.noise, GaussianNoise):
        return gaussian_conv_sums(y_sorted, atoms, x, ctx.noise.sigma, want_grad)
    n = atoms.size
    conv = np.empty(y_sorted.size)
    dens = np.zeros((y_sorted.size, ctx.d))
    step = max(1, _CHUNK_CELLS // n)
    for start in range(0, y_sorted.size, step):
        resid = y_sorted[start : start + step, None] - atoms[None, :]
        conv[start : start + step] = ctx.noise.cdf(resid).mean(axis=1)
        if want_grad:
            dens[start : start + step] = ctx.noise.pdf(resid) @ x / n
    return conv, dens


def conv_cdf(ctx: CriterionContext, beta, y):
    """Convolution CDF ``C_{n,beta}(y)``; ``y`` may be scalar or array."""
    beta = _check_beta(ctx, beta)
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    order = np.argsort(y_arr, kind="stable")
    values, _ = conv_sums(ctx, beta, np.ascontiguousarray(y_arr[order]))
    out = np.empty_like(values)
    out[order] = np.clip(values, 0.0, 1.0)
    return float(out[0]) if np.ndim(y) == 0 else out.reshape(np.shape(y))


def dn_criterion(ctx: CriterionContext, beta, method="auto") -> float:
    beta = _check_beta(ctx, beta)
    conv, _ = conv_sums(ctx, beta, ctx.sorted_responses, method=method)
    return float(np.mean((ctx.ecdf_values - conv) ** 2))


def dn_value_and_gradient(ctx: CriterionContext, beta, method="auto"):
    beta = _check_beta(ctx, beta)
    conv, dens = conv_sums(ctx, beta, ctx.sorted_responses, want_grad=True, method=method)
    resid = ctx.ecdf_values - conv
    value = float(np.mean(resid**2))
    grad = 2.0 / ctx.n * (resid @ dens)
    return value, grad


def dn_gradient(ctx: CriterionContext, beta, method="auto") -> np.ndarray:
    """Analytic gradient ``(2/n) sum_j (F_j - C_j) (1/n) sum_i f_eps(Y_j - beta' X_i) X_i``."""
    return dn_value_and_gradient(ctx, beta, method=method)[1]
