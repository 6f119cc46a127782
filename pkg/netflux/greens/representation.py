"""Control of w_k = phi(Z^k) - phi(Z) through the periodic Green's function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from netflux.errors import PreconditionError
from netflux.fields.geometry import ball_mask, cube_mask
from netflux.fields.realize import CoefficientField
from netflux.greens.green import solve_green
from netflux.solver.cg import SolveConfig
from netflux.solver.corrector import phi_energies, solve_corrector
from netflux.solver.operator import assemble


@dataclass
class WkAudit:
    """Both sides of the w_k estimates for one resampled site."""

    region_l2: float  # integral over A of w_k^2
    green_integral: float  # integral over A x B_tau(k) of |grad_x G|^2
    hat_phi_k: float  # hatPhi_k(Z^k)
    constant: float
    ratio: float  # region_l2 / (constant * hat_phi_k^2 * green_integral), at most 1
    gradient_energy: float  # integral of |grad w_k|^2
    normalized_energy: float  # the same for w_k / hatPhi_k(Z^k)
    energy_ratio: float  # gradient_energy against its ellipticity bound, at most 1


def green_representation_ratio(
    field: CoefficientField,
    field_k: CoefficientField,
    beta: float,
    k,
    tau: float,
    bounds: tuple[float, float],
    region: np.ndarray,
    cfg: SolveConfig,
) -> WkAudit:
    """
    Evaluate int_A w_k^2 <= C hatPhi_k(Z^k)^2 int_A int_{B_tau(k)} |grad_x G(x, y)|^2.

    The grid version of the estimate holds with C = 4 (a^* - a_*)^2, and
    the energy estimate int |grad w_k|^2 <= 2 ((a^* - a_*) / a_*)^2 hatPhi_k(Z^k)^2.

    Args:
        field: a(., Z)
        field_k: a(., Z^k), differing from field only near k
        beta: Mass term
        k: Resampled lattice point
        tau: Locality radius
        bounds: (a_*, a^*)
        region: Boolean cell mask of the set A
        cfg: Solver configuration
    """
    if not np.any(region):
        raise PreconditionError("The region A must contain at least one cell")
    a_lo, a_hi = bounds
    sol = solve_corrector(field, beta, cfg)
    sol_k = solve_corrector(field_k, beta, cfg)
    w = sol_k.phi - sol.phi
    volume = field.cell_volume

    region_l2 = float(np.sum(w[region] ** 2)) * volume
    hat_phi_k = phi_energies(sol_k, field_k, k, tau)[1]

    ball = ball_mask(field.d, field.n, field.h, field.L, k, tau) | cube_mask(field.d, field.m, field.L, k)
    op = assemble(field, beta)
    green_integral = 0.0
    for y in zip(*np.nonzero(region)):
        g = solve_green(field, beta, y, cfg)
        density = op.energy_density(g.values, add_e1=False)
        green_integral += float(np.sum(density[ball])) * volume * volume

    constant = 4.0 * (a_hi - a_lo) ** 2
    denominator = constant * hat_phi_k**2 * green_integral
    ratio = region_l2 / denominator if denominator > 0 else 0.0

    gradient_energy = float(np.sum(op.energy_density(w, add_e1=False))) * volume
    energy_bound = 2.0 * ((a_hi - a_lo) / a_lo) ** 2 * hat_phi_k**2
    return WkAudit(
        region_l2=region_l2,
        green_integral=green_integral,
        hat_phi_k=hat_phi_k,
        constant=constant,
        ratio=ratio,
        gradient_energy=gradient_energy,
        normalized_energy=gradient_energy / hat_phi_k**2 if hat_phi_k > 0 else 0.0,
        energy_ratio=gradient_energy / energy_bound if energy_bound > 0 else 0.0,
    )
