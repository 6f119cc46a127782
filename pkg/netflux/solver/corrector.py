"""The periodic corrector phi and the flux functional Gamma_{L,beta}."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from netflux.fields.geometry import ball_mask, cube_mask
from netflux.fields.realize import CoefficientField
from netflux.solver.cg import SolveConfig, conjugate_gradient
from netflux.solver.operator import assemble, face_gradient

logger = logging.getLogger(__name__)


@dataclass
class CorrectorSolution:
    """Discrete corrector plus solve metadata and both forms of the flux."""

    phi: np.ndarray
    beta: float
    residual_norm: float
    iterations: int
    gamma_energy: float
    gamma_linear: float

    @property
    def gamma(self) -> float:
        return self.gamma_energy

    def summary(self) -> dict:
        """JSON-ready summary (the phi array is left out)."""
        return {
            "beta": self.beta,
            "gamma_energy": self.gamma_energy,
            "gamma_linear": self.gamma_linear,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
        }


def flux_energy(sol: CorrectorSolution, field: CoefficientField, beta: float) -> float:
    """
    Energy form: |D_L|^-1 [sum_faces h^d kf (D phi + e_1)^2 + beta sum_cells h^d phi^2].
    """
    op = assemble(field, beta)
    h = field.h
    total = 0.0
    for ax, kf in enumerate(op.face_conductivities):
        g = face_gradient(sol.phi, h, ax)
        if ax == 0:
            g = g + 1.0
        total += float(np.sum(kf * g**2))
    total += beta * float(np.sum(sol.phi**2))
    return total * field.cell_volume / field.volume


def flux_linear(sol: CorrectorSolution, field: CoefficientField) -> float:
    """Net e_1 flux: |D_L|^-1 sum over e_1-normal faces of h^d kf (1 + D_1 phi)."""
    kf = assemble(field, 0.0).face_conductivities[0]
    g = 1.0 + face_gradient(sol.phi, field.h, 0)
    return float(np.sum(kf * g)) * field.cell_volume / field.volume


def solve_corrector(field: CoefficientField, beta: float, cfg: SolveConfig) -> CorrectorSolution:
    """
    Solve the periodic corrector equation -div(a (grad phi + e_1)) + beta phi = 0.

    Args:
        field: Coefficient field
        beta: Mass term, beta >= 0; at beta = 0 the solution has zero mean
        cfg: Solver configuration

    Returns:
        CorrectorSolution with both flux forms evaluated

    Raises:
        SolverError: CG did not converge within cfg.max_iterations
    """
    op = assemble(field, beta)
    phi, residual, iterations = conjugate_gradient(op, op.corrector_rhs(), cfg)
    sol = CorrectorSolution(
        phi=phi,
        beta=float(beta),
        residual_norm=residual,
        iterations=iterations,
        gamma_energy=0.0,
        gamma_linear=0.0,
    )
    sol.gamma_energy = flux_energy(sol, field, beta)
    sol.gamma_linear = flux_linear(sol, field)
    logger.debug(
        "Corrector solve: Gamma=%.12g (linear %.12g), %d iterations",
        sol.gamma_energy,
        sol.gamma_linear,
        iterations,
    )
    return sol


def phi_energies(
    sol: CorrectorSolution, field: CoefficientField, j, tau: float
) -> tuple[float, float]:
    """
    Local Dirichlet energies of grad phi + e_1.

    Args:
        sol: Solved corrector
        field: The field it was solved on
        j: Lattice point (corner of the unit cube Q_j)
        tau: Ball radius

    Returns:
        (Phi_j over Q_j, hatPhi_j over the torus ball B_tau(j))
    """
    density = assemble(field, sol.beta).energy_density(sol.phi)
    cube = cube_mask(field.d, field.m, field.L, j)
    ball = ball_mask(field.d, field.n, field.h, field.L, j, tau)
    # B_tau(j) contains Q_j for tau > sqrt(d); keep the inclusion exact on the grid
    ball |= cube
    phi_cube = np.sqrt(float(np.sum(density[cube])) * field.cell_volume)
    phi_ball = np.sqrt(float(np.sum(density[ball])) * field.cell_volume)
    return phi_cube, phi_ball


def dump_phi(sol: CorrectorSolution, field: CoefficientField, path: str):
    """Write phi as a flat binary: int64 header (d, L, m) then row-major float64."""
    header = np.asarray([field.d, field.L, field.m], dtype="<i8")
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(sol.phi, dtype="<f8").tobytes())
