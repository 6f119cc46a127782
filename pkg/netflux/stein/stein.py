"""Numerical solution of the Stein equation psi' - x psi = h - E h(Y)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from netflux.errors import PreconditionError, QuadratureError

logger = logging.getLogger(__name__)

TestFunction = Callable[[np.ndarray], np.ndarray]

MIN_HALF_WIDTH = 6.0
MIN_GRID = 10_000
# Gauss-Legendre nodes per grid cell
NODES_PER_CELL = 5
# Second difference of h' above which a node counts as a kink, and the nodes skipped around it
KINK_TOLERANCE = 1e-5
KINK_MARGIN = 3


@dataclass
class SteinSolution:
    """psi and its first two derivatives on the uniform grid [-T, T]."""

    grid: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    psi_dprime: np.ndarray
    eh: float
    h_description: str
    residual: float

    @property
    def sup_psi_prime(self) -> float:
        return float(np.max(np.abs(self.psi_prime)))

    @property
    def sup_psi_dprime(self) -> float:
        return float(np.max(np.abs(self.psi_dprime)))


def _normal_pdf(t):
    return np.exp(-0.5 * np.square(t)) / math.sqrt(2.0 * math.pi)


def _derivative(h: TestFunction, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    return (np.asarray(h(x + step), dtype=float) - np.asarray(h(x - step), dtype=float)) / (2.0 * step)


def _cell_integrals(h: TestFunction, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell Gauss-Legendre integrals of h phi and of phi."""
    nodes, weights = np.polynomial.legendre.leggauss(NODES_PER_CELL)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    points = 0.5 * (hi + lo)[:, None] + half[:, None] * nodes[None, :]
    density = _normal_pdf(points)
    values = np.asarray(h(points.ravel()), dtype=float).reshape(points.shape)
    return (values * density) @ weights * half, density @ weights * half


def _tails(h: TestFunction, T: float, shift: float) -> tuple[float, float]:
    """
    int_{-inf}^{-T} and int_T^{inf} of (h - shift) phi with h continued
    linearly from its value and slope at +-T.
    """
    q = float(ndtr(-T))
    first_moment = float(_normal_pdf(T)) - T * q
    ends = np.array([-T, T])
    values = np.asarray(h(ends), dtype=float) - shift
    slopes = _derivative(h, ends)
    left = values[0] * q - slopes[0] * first_moment
    right = values[1] * q + slopes[1] * first_moment
    return float(left), float(right)


def expectation_normal(h: TestFunction, T: float = 8.0, n_cells: int = 20000) -> float:
    """E h(Y) for Y ~ N(0, 1) by composite Gauss-Legendre on [-T, T] plus linear tails."""
    edges = np.linspace(-T, T, n_cells + 1)
    h_cells, _ = _cell_integrals(h, edges)
    left, right = _tails(h, T, 0.0)
    return float(np.sum(h_cells) + left + right)


def ode_residual(grid: np.ndarray, psi: np.ndarray, psi_prime: np.ndarray, h_slope: np.ndarray) -> float:
    """
    Max gap between psi' and a fourth-order central difference of psi.

    Nodes whose stencil reaches a kink of h, seen as a jump in h', are skipped.
    """
    step = float(grid[1] - grid[0])
    kinks = np.zeros(grid.size, dtype=bool)
    kinks[1:-1] = np.abs(np.diff(h_slope, 2)) > KINK_TOLERANCE
    near_kink = np.convolve(kinks.astype(float), np.ones(2 * KINK_MARGIN + 1), mode="same") > 0
    difference = (psi[:-4] - 8.0 * psi[1:-3] + 8.0 * psi[3:-1] - psi[4:]) / (12.0 * step)
    gap = np.abs(difference - psi_prime[2:-2])[~near_kink[2:-2]]
    return float(gap.max()) if gap.size else 0.0


def solve_stein(
    h: TestFunction,
    T: float = 8.0,
    n_grid: int = 20001,
    h_description: Optional[str] = None,
    tolerance: float = 1e-5,
) -> SteinSolution:
    """
    Solve psi'(x) - x psi(x) = h(x) - E h(Y) on [-T, T].

    For x <= 0 psi is exp(x^2/2) int_{-inf}^x (h - E h) exp(-t^2/2) dt; for
    x > 0 the complementary integral to +inf is used so nothing overflows.

    Args:
        h: Vectorized 1-Lipschitz test function
        T: Grid half-width, at least 6
        n_grid: Number of grid points, at least 10^4
        h_description: Label stored with the solution
        tolerance: Allowed change of E h(Y) when the quadrature grid is halved

    Raises:
        PreconditionError: T or n_grid below their minima
        QuadratureError: E h(Y) moved by more than tolerance under grid halving
    """
    if T < MIN_HALF_WIDTH:
        raise PreconditionError(f"T must be at least {MIN_HALF_WIDTH}, got {T}")
    if n_grid < MIN_GRID:
        raise PreconditionError(f"n_grid must be at least {MIN_GRID}, got {n_grid}")

    grid = np.linspace(-T, T, n_grid)
    h_cells, phi_cells = _cell_integrals(h, grid)
    tail_left, tail_right = _tails(h, T, 0.0)
    eh = float(np.sum(h_cells) + tail_left + tail_right)

    coarse = expectation_normal(h, T, (n_grid - 1) // 2)
    if abs(coarse - eh) > tolerance:
        raise QuadratureError(
            f"E h(Y) changed by {abs(coarse - eh):.3e} under grid halving (tolerance {tolerance:.1e})"
        )

    centered = h_cells - eh * phi_cells
    tail_left, tail_right = _tails(h, T, eh)
    # from_left[i] = int_{-inf}^{x_i}, from_right[i] = int_{x_i}^{inf} of (h - E h) phi
    from_left = tail_left + np.concatenate(([0.0], np.cumsum(centered)))
    from_right = tail_right + np.concatenate((np.cumsum(centered[::-1])[::-1], [0.0]))

    density = _normal_pdf(grid)
    psi = np.where(grid <= 0.0, from_left / density, -from_right / density)

    h_grid = np.asarray(h(grid), dtype=float)
    h_slope = _derivative(h, grid)
    psi_prime = grid * psi + h_grid - eh
    psi_dprime = psi + grid * psi_prime + h_slope

    # The left and right representations of psi must agree at x = 0
    middle = int(np.argmin(np.abs(grid)))
    split = abs(from_left[middle] + from_right[middle]) / float(density[middle])
    residual = max(ode_residual(grid, psi, psi_prime, h_slope), split)
    logger.debug("Stein solve: E h(Y)=%.12g, residual %.3e", eh, residual)

    return SteinSolution(
        grid=grid,
        psi=psi,
        psi_prime=psi_prime,
        psi_dprime=psi_dprime,
        eh=eh,
        h_description=h_description or getattr(h, "__name__", "h"),
        residual=residual,
    )


def covariance_representation_check(samples, h: TestFunction, sol: SteinSolution) -> tuple[float, float, float]:
    """
    Compare E[h(W)] - E h(Y) with E[psi'(W) - W psi(W)] on samples of W.

    psi and psi' are interpolated from the grid independently.

    Returns:
        (lhs, rhs, standard error of lhs)
    """
    w = np.asarray(samples, dtype=float).ravel()
    values = np.asarray(h(w), dtype=float)
    lhs = float(values.mean()) - sol.eh
    psi = np.interp(w, sol.grid, sol.psi)
    psi_prime = np.interp(w, sol.grid, sol.psi_prime)
    rhs = float(np.mean(psi_prime - w * psi))
    se = float(values.std(ddof=1) / np.sqrt(w.size)) if w.size > 1 else float("nan")
    return lhs, rhs, se
