"""Periodic Green's function of the corrector operator and its decay audits."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from netflux.errors import PreconditionError
from netflux.fields.geometry import ball_mask, torus_distance
from netflux.fields.realize import CoefficientField
from netflux.solver.cg import SolveConfig, conjugate_gradient
from netflux.solver.operator import assemble

logger = logging.getLogger(__name__)

Cell = tuple[int, ...]


@dataclass
class GreenFunction:
    """G(., y) for one source cell y."""

    values: np.ndarray
    beta: float
    field: CoefficientField
    source: Cell

    def at(self, x: Cell) -> float:
        return float(self.values[tuple(x)])


@dataclass
class DecayBin:
    """One dyadic distance bin of a decay profile."""

    bin_lo: float
    bin_hi: float
    max_scaled_G: float
    n_cells: int


def _check_cell(field: CoefficientField, y) -> Cell:
    y = tuple(int(i) for i in y)
    if len(y) != field.d or any(i < 0 or i >= field.n for i in y):
        raise PreconditionError(f"Cell {y} is outside the {field.n}^{field.d} grid")
    return y


def cell_center(field: CoefficientField, cell: Cell) -> list[float]:
    return [(i + 0.5) * field.h for i in cell]


def green_rhs(field: CoefficientField, y: Cell) -> np.ndarray:
    """h^d (delta_y - |D_L|^-1) with delta_y = 1/h^d on cell y; sums to zero."""
    b = np.full(field.values.shape, -field.cell_volume / field.volume)
    b[y] += 1.0
    return b


def solve_green(field: CoefficientField, beta: float, y, cfg: SolveConfig) -> GreenFunction:
    """
    Solve -div_x(a grad_x G) + beta G = delta_y - |D_L|^-1 on the torus.

    At beta = 0 the solution is normalized to zero mean.

    Raises:
        SolverError: propagated from the CG solve
    """
    y = _check_cell(field, y)
    op = assemble(field, beta)
    values, residual, iterations = conjugate_gradient(op, green_rhs(field, y), cfg)
    logger.debug("Green solve at %s: %d iterations, residual %.3e", y, iterations, residual)
    return GreenFunction(values=values, beta=float(beta), field=field, source=y)


def green_matrix(field: CoefficientField, beta: float, cfg: SolveConfig) -> np.ndarray:
    """All G(x, y) as an (N, N) matrix indexed by flattened cells (small grids only)."""
    n_cells = field.values.size
    matrix = np.empty((n_cells, n_cells))
    for flat in range(n_cells):
        y = np.unravel_index(flat, field.values.shape)
        matrix[:, flat] = solve_green(field, beta, y, cfg).values.ravel()
    return matrix


def apply_green(matrix: np.ndarray, field: CoefficientField, f: np.ndarray) -> np.ndarray:
    """phi_f(x) = sum_y G(x, y) f(y) h^d."""
    return (matrix @ f.ravel() * field.cell_volume).reshape(field.values.shape)


def dense_operator_matrix(field: CoefficientField, beta: float) -> np.ndarray:
    """
    Dense matrix of the finite-volume operator, built entry by entry from
    the stencil rather than through the matrix-free apply.
    """
    shape = field.values.shape
    n_cells = field.values.size
    h = field.h
    values = field.values
    matrix = np.zeros((n_cells, n_cells))
    scale = field.cell_volume / h**2
    for flat in range(n_cells):
        cell = np.unravel_index(flat, shape)
        for ax in range(field.d):
            for step in (-1, 1):
                neighbour = list(cell)
                neighbour[ax] = (neighbour[ax] + step) % field.n
                neighbour = tuple(neighbour)
                kf = 2.0 / (1.0 / values[cell] + 1.0 / values[neighbour])
                other = np.ravel_multi_index(neighbour, shape)
                matrix[flat, flat] += scale * kf
                matrix[flat, other] -= scale * kf
        matrix[flat, flat] += field.cell_volume * beta
    return matrix


def dense_spectral_green(field: CoefficientField, beta: float, y) -> np.ndarray:
    """
    Independent oracle: G(., y) from the eigen-decomposition of the dense
    operator, with the constant mode dropped at beta = 0.
    """
    y = _check_cell(field, y)
    eigenvalues, eigenvectors = scipy.linalg.eigh(dense_operator_matrix(field, beta))
    b = green_rhs(field, y).ravel()
    coefficients = eigenvectors.T @ b
    cutoff = 1e-10 * float(np.max(np.abs(eigenvalues)))
    keep = np.abs(eigenvalues) > cutoff
    solution = eigenvectors[:, keep] @ (coefficients[keep] / eigenvalues[keep])
    return solution.reshape(field.values.shape)


def _torus_distance_to_cell(field: CoefficientField, y: Cell) -> np.ndarray:
    return torus_distance(field.d, field.n, field.h, field.L, cell_center(field, y))


def decay_profile_3d(g: GreenFunction, y=None) -> list[DecayBin]:
    """
    Max of |G(x, y)| dist(x, y)^(d-2) over dyadic distance bins.

    Bins start at one grid spacing: [h 2^i, h 2^(i+1)).
    """
    field = g.field
    if field.d != 3:
        raise PreconditionError(f"decay_profile_3d needs d = 3, got d = {field.d}")
    y = g.source if y is None else _check_cell(field, y)
    dist = _torus_distance_to_cell(field, y)
    scaled = np.abs(g.values) * dist ** (field.d - 2)
    far = dist.max()

    bins = []
    lo = field.h
    while lo <= far:
        hi = 2.0 * lo
        members = (dist >= lo) & (dist < hi)
        count = int(np.count_nonzero(members))
        if count:
            bins.append(DecayBin(lo, hi, float(scaled[members].max()), count))
        lo = hi
    return bins


def write_decay_csv(profile: list[DecayBin], path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi", "max_scaled_G", "n_cells"])
        for row in profile:
            writer.writerow([repr(row.bin_lo), repr(row.bin_hi), repr(row.max_scaled_G), row.n_cells])


def annulus_gradient_energy_2d(g: GreenFunction, y, x0, R: float) -> float:
    """
    Integral of |grad_x G(x, y)|^2 over the torus ball B_R(x0), d = 2.

    Args:
        g: Green's function with source y
        y: Source cell
        x0: Center cell of the ball
        R: Ball radius; requires dist(x0, y) > 2R
    """
    field = g.field
    if field.d != 2:
        raise PreconditionError(f"annulus_gradient_energy_2d needs d = 2, got d = {field.d}")
    y = _check_cell(field, y)
    x0 = _check_cell(field, x0)
    separation = float(_torus_distance_to_cell(field, y)[x0])
    if not separation > 2.0 * R:
        raise PreconditionError(f"dist(x0, y) = {separation:.4g} must exceed 2R = {2.0 * R:.4g}")
    density = assemble(field, g.beta).energy_density(g.values, add_e1=False)
    ball = ball_mask(field.d, field.n, field.h, field.L, cell_center(field, x0), R)
    return float(np.sum(density[ball])) * field.cell_volume


def dyadic_monotone(profile: list[DecayBin], slack: float = 0.1) -> bool:
    """True if bin maxima never grow by more than slack beyond the first bin."""
    maxima = [b.max_scaled_G for b in profile[1:]]
    return all(later <= (1.0 + slack) * earlier for earlier, later in zip(maxima, maxima[1:]))


def free_space_constant(d: int) -> float:
    """|G| dist^(d-2) of the free-space Laplacian Green's function, d >= 3."""
    # Surface area of the unit sphere times (d - 2)
    area = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
    return 1.0 / ((d - 2) * area)
