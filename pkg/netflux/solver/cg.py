"""Preconditioned conjugate gradients on the matrix-free operator."""

from __future__ import annotations

import logging
from dataclasses import dataclass, asdict
from typing import Literal

import numpy as np

from netflux.errors import ConfigError, SolverError
from netflux.solver.operator import DiscreteOperator

logger = logging.getLogger(__name__)


@dataclass
class SolveConfig:
    """Tolerance and iteration budget of a corrector or Green's function solve."""

    rel_tolerance: float = 1e-10
    max_iterations: int = 20000
    preconditioner: Literal["none", "diagonal"] = "diagonal"
    # True residual is recomputed from scratch this often to stop drift
    refresh_every: int = 50

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise ConfigError(f"rel_tolerance must be positive, got {self.rel_tolerance}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be positive, got {self.max_iterations}")
        if self.preconditioner not in ("none", "diagonal"):
            raise ConfigError(f"Unknown preconditioner {self.preconditioner!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _remove_mean(u: np.ndarray) -> np.ndarray:
    return u - u.mean()


def conjugate_gradient(
    op: DiscreteOperator, b: np.ndarray, cfg: SolveConfig
) -> tuple[np.ndarray, float, int]:
    """
    Solve op x = b.

    When beta = 0 the operator's null space is the constants: b must have
    zero sum, and every iterate and search direction is kept mean-free so
    the returned x has zero mean.

    Args:
        op: Symmetric positive (semi)definite operator
        b: Right-hand side
        cfg: Tolerance and iteration budget

    Returns:
        (x, relative residual norm, iterations)
    """
    singular = op.beta == 0.0
    b_norm = float(np.sqrt(np.sum(b * b)))
    if singular:
        compatibility = abs(float(np.sum(b)))
        if compatibility > 1e-10 * max(b_norm, 1.0) * np.sqrt(b.size):
            raise SolverError(
                f"Right-hand side has nonzero total {compatibility:.3e} at beta = 0",
                residual=compatibility,
            )
        b = _remove_mean(b)

    x = np.zeros_like(b)
    if b_norm == 0.0:
        return x, 0.0, 0

    inv_diag = 1.0 / op.diagonal() if cfg.preconditioner == "diagonal" else None

    def precondition(r):
        z = r * inv_diag if inv_diag is not None else r.copy()
        return _remove_mean(z) if singular else z

    r = b.copy()
    z = precondition(r)
    d = z.copy()
    rz = float(np.sum(r * z))
    threshold = cfg.rel_tolerance * b_norm

    for iteration in range(1, cfg.max_iterations + 1):
        q = op.apply(d)
        alpha = rz / float(np.sum(d * q))
        x += alpha * d
        if iteration % cfg.refresh_every == 0:
            r = b - op.apply(x)
        else:
            r -= alpha * q
        if singular:
            x = _remove_mean(x)
            r = _remove_mean(r)

        if float(np.sqrt(np.sum(r * r))) <= threshold:
            # Confirm with the true residual before accepting
            true_r = b - op.apply(x)
            true_norm = float(np.sqrt(np.sum(true_r * true_r)))
            if true_norm <= threshold:
                logger.debug("CG converged in %d iterations (residual %.3e)", iteration, true_norm / b_norm)
                return x, true_norm / b_norm, iteration
            r = true_r

        z = precondition(r)
        rz_new = float(np.sum(r * z))
        d = z + (rz_new / rz) * d
        rz = rz_new

    final = float(np.sqrt(np.sum((b - op.apply(x)) ** 2))) / b_norm
    raise SolverError(
        f"CG did not converge in {cfg.max_iterations} iterations (residual {final:.3e})",
        residual=final,
        iterations=cfg.max_iterations,
    )
