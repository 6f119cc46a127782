"""Matrix-free cell-centered finite-volume operator -div(a grad u) + beta u."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from netflux.errors import ConfigError
from netflux.fields.realize import CoefficientField


def harmonic_faces(values: np.ndarray) -> list[np.ndarray]:
    """
    Face conductivities 2 / (1/a_c + 1/a_c') between each cell and its
    periodic right neighbour, one array per axis.
    """
    return [
        2.0 / (1.0 / values + 1.0 / np.roll(values, -1, axis=ax)) for ax in range(values.ndim)
    ]


def face_gradient(u: np.ndarray, h: float, ax: int) -> np.ndarray:
    """(u_{i+1} - u_i) / h on the right face of every cell, periodic."""
    return (np.roll(u, -1, axis=ax) - u) / h


def face_divergence(flux: np.ndarray, h: float, ax: int) -> np.ndarray:
    """(F_{i+1/2} - F_{i-1/2}) / h at every cell, periodic."""
    return (flux - np.roll(flux, 1, axis=ax)) / h


@dataclass
class DiscreteOperator:
    """
    The bilinear form of the weak corrector equation on the grid.

    apply(u) returns h^d * (-div_h(kf grad_h u) + beta u), so that
    <apply(u), v> = sum_faces h^d kf Du Dv + beta sum_cells h^d u v,
    which is symmetric and positive semidefinite.
    """

    field: CoefficientField
    beta: float
    face_conductivities: list[np.ndarray] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.field.values.shape

    def apply(self, u: np.ndarray) -> np.ndarray:
        h = self.field.h
        out = np.zeros_like(u)
        for ax, kf in enumerate(self.face_conductivities):
            out -= face_divergence(kf * face_gradient(u, h, ax), h, ax)
        out += self.beta * u
        return self.field.cell_volume * out

    def diagonal(self) -> np.ndarray:
        h = self.field.h
        diag = np.zeros(self.shape)
        for ax, kf in enumerate(self.face_conductivities):
            diag += (kf + np.roll(kf, 1, axis=ax)) / h**2
        diag += self.beta
        return self.field.cell_volume * diag

    def pairing(self, u: np.ndarray, v: np.ndarray) -> float:
        """Euclidean pairing <u, v> of grid vectors."""
        return float(np.sum(u * v))

    def corrector_rhs(self) -> np.ndarray:
        """h^d div_h(kf e_1): the forcing of the corrector equation."""
        kf = self.face_conductivities[0]
        return self.field.cell_volume * face_divergence(kf, self.field.h, 0)

    def energy_density(self, u: np.ndarray, add_e1: bool = True) -> np.ndarray:
        """
        Per-cell |grad u (+ e_1)|^2 reconstructed from face differences.

        Each face's squared difference is shared equally by its two cells,
        so sum(density) * h^d equals the face-sum energy.
        """
        h = self.field.h
        density = np.zeros(self.shape)
        for ax in range(self.field.d):
            g = face_gradient(u, h, ax)
            if add_e1 and ax == 0:
                g = g + 1.0
            sq = g**2
            density += 0.5 * (sq + np.roll(sq, 1, axis=ax))
        return density


def assemble(field: CoefficientField, beta: float) -> DiscreteOperator:
    """
    Build the matrix-free operator for a coefficient field.

    Args:
        field: Coefficient field on the periodic grid
        beta: Mass term, beta >= 0

    Returns:
        DiscreteOperator holding the harmonic face conductivities
    """
    if beta < 0:
        raise ConfigError(f"beta must be non-negative, got {beta}")
    return DiscreteOperator(
        field=field, beta=float(beta), face_conductivities=harmonic_faces(field.values)
    )
