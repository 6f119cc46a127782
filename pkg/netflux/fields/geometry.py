"""Torus geometry on the cell-centered grid of D_L."""

import numpy as np


def cell_centers(n: int, h: float) -> np.ndarray:
    """1D coordinates of the n cell centers along one axis."""
    return (np.arange(n) + 0.5) * h


def axis_distance(coords: np.ndarray, point: float, L: float) -> np.ndarray:
    """Periodized 1D distance between coords and point on a circle of length L."""
    diff = np.abs(coords - point) % L
    return np.minimum(diff, L - diff)


def torus_distance(d: int, n: int, h: float, L: float, point) -> np.ndarray:
    """
    Distance from every cell center to point in the periodized metric.

    Args:
        d: Dimension
        n: Cells per axis
        h: Grid spacing
        L: Period
        point: Sequence of d coordinates

    Returns:
        Array of shape (n,)*d
    """
    centers = cell_centers(n, h)
    sq = np.zeros((n,) * d)
    for ax in range(d):
        shape = [1] * d
        shape[ax] = n
        sq = sq + axis_distance(centers, float(point[ax]), L).reshape(shape) ** 2
    return np.sqrt(sq)


def ball_mask(d: int, n: int, h: float, L: float, point, radius: float) -> np.ndarray:
    """Boolean mask of the cells whose centers lie in the open torus ball B_radius(point)."""
    return torus_distance(d, n, h, L, point) < radius


def lattice_distance(j, k, L: int) -> float:
    """Periodized distance between two lattice points of the period cell."""
    j = np.asarray(j, dtype=float)
    k = np.asarray(k, dtype=float)
    return float(np.sqrt(np.sum(axis_distance(j, k, L) ** 2)))


def cube_mask(d: int, m: int, L: int, j) -> np.ndarray:
    """Boolean mask of the cells inside the unit cube Q_j = j + [0, 1)^d, j taken mod L."""
    n = m * L
    mask = np.zeros((n,) * d, dtype=bool)
    corner = [int(j[ax]) % L for ax in range(d)]
    mask[tuple(slice(corner[ax] * m, (corner[ax] + 1) * m) for ax in range(d))] = True
    return mask
