"""Exact 1-Wasserstein distance between empirical measures on the line."""

from __future__ import annotations

import numpy as np

from .data_model import EmpiricalDist

DEFAULT_REFERENCE_SIZE = 1_000_000


def _atoms(dist) -> np.ndarray:
    if isinstance(dist, EmpiricalDist):
        return dist.atoms
    atoms = np.sort(np.asarray(dist, dtype=float).ravel())
    if atoms.size == 0:
        raise ValueError("empirical distribution is empty")
    return atoms


def w1_cdf_integral(a, b) -> float:
    """W1 as the integral of |F_a - F_b| over the merged support.

    Both CDFs are step functions, so the integral is an exact finite sum over
    the gaps between consecutive merged points.
    """
    a, b = _atoms(a), _atoms(b)
    merged = np.concatenate([a, b])
    merged.sort(kind="mergesort")
    gaps = np.diff(merged)
    fa = np.searchsorted(a, merged[:-1], side="right") / a.size
    fb = np.searchsorted(b, merged[:-1], side="right") / b.size
    return float(np.sum(np.abs(fa - fb) * gaps))


def w1_empirical(a, b) -> float:
    """Exact W1 between two empirical measures.

    Equal sample sizes use the order-statistic formula
    ``mean(|a_(i) - b_(i)|)``; otherwise the CDF-difference integral.
    """
    a, b = _atoms(a), _atoms(b)
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    return w1_cdf_integral(a, b)


def w1_vs_reference(est, reference_sampler, m: int = DEFAULT_REFERENCE_SIZE, seed=None) -> float:
    """W1 between ``est`` and an m-point sample from ``reference_sampler(m, seed)``."""
    if m < 1:
        raise ValueError("reference size m must be at least 1")
    reference = np.asarray(reference_sampler(m, seed), dtype=float)
    return w1_empirical(est, reference)


def loglinear_slope(ns, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(ns)``."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or ns.size < 2:
        raise ValueError("need at least two (n, value) pairs of matching length")
    if np.any(values <= 0) or np.any(ns <= 0):
        raise ValueError("log-linear fit needs positive values")
    lx, ly = np.log(ns), np.log(values)
    lx = lx - lx.mean()
    return float(lx @ (ly - ly.mean()) / (lx @ lx))
