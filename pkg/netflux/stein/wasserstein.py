"""Exact 1D Kantorovich-Wasserstein distance to the standard normal."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr, ndtri

from netflux.errors import PreconditionError

MIN_SAMPLES = 100


def _normal_pdf(t):
    return np.exp(-0.5 * np.square(t)) / math.sqrt(2.0 * math.pi)


def _cdf_antiderivative(t: float) -> float:
    """G(t) = t Phi(t) + phi(t), so that G' = Phi and G(-inf) = 0."""
    return float(t * ndtr(t) + _normal_pdf(t))


def _abs_gap(a: float, b: float, c: float) -> float:
    """int_a^b |c - Phi(t)| dt for a constant CDF level c."""

    def signed(lo, hi):
        return _cdf_antiderivative(hi) - _cdf_antiderivative(lo) - c * (hi - lo)

    if c <= 0.0:
        return signed(a, b)
    if c >= 1.0:
        return -signed(a, b)
    crossing = float(ndtri(c))
    if crossing <= a:
        return signed(a, b)
    if crossing >= b:
        return -signed(a, b)
    return -signed(a, crossing) + signed(crossing, b)


def wasserstein_discrete_to_normal(atoms, weights) -> float:
    """
    W_1 between sum_i weights_i delta_{atoms_i} and N(0, 1).

    Uses W_1 = int |F(t) - Phi(t)| dt, integrated exactly between
    consecutive atoms where F is constant.
    """
    atoms = np.asarray(atoms, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if atoms.ndim != 1 or atoms.shape != weights.shape or atoms.size == 0:
        raise PreconditionError("atoms and weights must be matching non-empty 1D arrays")
    if np.any(weights < 0) or abs(float(weights.sum()) - 1.0) > 1e-9:
        raise PreconditionError("weights must be non-negative and sum to one")
    if not np.all(np.isfinite(atoms)):
        raise PreconditionError("atoms must be finite")

    support, inverse = np.unique(atoms, return_inverse=True)
    mass = np.bincount(inverse, weights=weights)
    levels = np.minimum(np.cumsum(mass) / float(weights.sum()), 1.0)

    # Left tail, where F = 0: int_{-inf}^{x_1} Phi = G(x_1)
    total = _cdf_antiderivative(support[0])
    for i in range(len(support) - 1):
        total += _abs_gap(support[i], support[i + 1], float(levels[i]))
    # Right tail, where F = 1: int_{x_n}^{inf} (1 - Phi) = G(x_n) - x_n
    total += _cdf_antiderivative(support[-1]) - support[-1]
    return float(total)


def wasserstein_to_normal(samples) -> float:
    """d_W between the empirical law of already standardized samples and N(0, 1)."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < MIN_SAMPLES:
        raise PreconditionError(f"Need at least {MIN_SAMPLES} samples, got {samples.size}")
    return wasserstein_discrete_to_normal(samples, np.full(samples.size, 1.0 / samples.size))


def standardize(samples) -> tuple[np.ndarray, bool]:
    """
    Shift and scale samples to empirical mean 0 and variance 1.

    Returns:
        (standardized samples, degenerate) where degenerate means the
        empirical variance is zero and the samples are only centered
    """
    samples = np.asarray(samples, dtype=float).ravel()
    centered = samples - samples.mean()
    scale = float(np.sqrt(np.mean(centered**2)))
    if scale <= 1e-14 * max(1.0, float(np.max(np.abs(samples)))):
        return np.zeros_like(centered), True
    return centered / scale, False
