"""The subset measure K_{n,A} on S_{n,j} and the exact Chatterjee identity."""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from netflux.errors import PreconditionError

# Largest n for which chatterjee_identity_exact enumerates every (Z, Z') pair
MAX_EXACT_SITES = 4


def subset_weight(n: int, size: int) -> float:
    """K_{n,A} = |A|! (n - |A| - 1)! / n! for A a subset of [n] without j."""
    if not 0 <= size <= n - 1:
        raise PreconditionError(f"Subset size {size} is impossible for n = {n}")
    return math.factorial(size) * math.factorial(n - size - 1) / math.factorial(n)


def enumerate_subsets(n: int, j: int):
    """Yield every A in S_{n,j} (subsets of {0..n-1} not containing j) with its weight."""
    if not 0 <= j < n:
        raise PreconditionError(f"Site {j} is outside 0..{n - 1}")
    others = [i for i in range(n) if i != j]
    for size in range(n):
        weight = subset_weight(n, size)
        for subset in itertools.combinations(others, size):
            yield frozenset(subset), weight


def sample_subset_A(n: int, j: int, rng: np.random.Generator) -> frozenset:
    """
    Draw A from K_{n,.} on S_{n,j}.

    |A| is uniform on {0, ..., n-1} and A is then a uniform subset of that
    size, which gives every A probability |A|! (n - |A| - 1)! / n!.
    """
    if not 0 <= j < n:
        raise PreconditionError(f"Site {j} is outside 0..{n - 1}")
    size = int(rng.integers(0, n))
    others = np.array([i for i in range(n) if i != j], dtype=int)
    if size == 0:
        return frozenset()
    return frozenset(int(i) for i in rng.choice(others, size=size, replace=False))


def _swap(z: tuple, source: tuple, indices) -> tuple:
    out = list(z)
    for i in indices:
        out[i] = source[i]
    return tuple(out)


def chatterjee_identity_exact(
    g: Callable[[tuple], float], f: Callable[[tuple], float], n: int, q: float
) -> tuple[float, float]:
    """
    Both sides of Cov(g(Z), f(Z)) = 1/2 sum_j sum_A K_{n,A} E[D_j g(Z) D_j f(Z^A)].

    Z and Z' are independent vectors of n i.i.d. Bernoulli(q) bits and the
    expectations are computed by enumerating all 4^n pairs.

    Returns:
        (lhs, rhs)
    """
    if n < 1 or n > MAX_EXACT_SITES:
        raise PreconditionError(f"Exact enumeration supports 1 <= n <= {MAX_EXACT_SITES}, got {n}")
    if not 0.0 <= q <= 1.0:
        raise PreconditionError(f"q must lie in [0, 1], got {q}")

    states = list(itertools.product((0, 1), repeat=n))

    def probability(z):
        ones = sum(z)
        return q**ones * (1.0 - q) ** (n - ones)

    mean_g = sum(probability(z) * g(z) for z in states)
    mean_f = sum(probability(z) * f(z) for z in states)
    lhs = sum(probability(z) * (g(z) - mean_g) * (f(z) - mean_f) for z in states)

    subsets = {j: list(enumerate_subsets(n, j)) for j in range(n)}
    rhs = 0.0
    for z in states:
        for z_prime in states:
            weight = probability(z) * probability(z_prime)
            if weight == 0.0:
                continue
            inner = 0.0
            for j in range(n):
                delta_g = g(_swap(z, z_prime, (j,))) - g(z)
                if delta_g == 0.0:
                    continue
                for subset, k_weight in subsets[j]:
                    z_a = _swap(z, z_prime, subset)
                    inner += k_weight * delta_g * (f(_swap(z_a, z_prime, (j,))) - f(z_a))
            rhs += weight * inner
    return float(lhs), float(0.5 * rhs)
