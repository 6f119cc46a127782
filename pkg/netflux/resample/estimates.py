"""Monte Carlo estimates of the Efron-Stein and normal approximation bounds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, asdict, field
from typing import Optional

import numpy as np

from netflux.errors import ConfigError, PreconditionError
from netflux.fields.config import FieldConfig
from netflux.fields.latent import derive_seed, sample_latent
from netflux.fields.realize import realize
from netflux.resample.differences import (
    ResampleTriple,
    delta_j_gamma_direct,
    delta_j_record,
    t_statistic_sample,
)
from netflux.resample.records import RecordWriter
from netflux.solver.cg import SolveConfig
from netflux.solver.corrector import solve_corrector
from netflux.stein.wasserstein import MIN_SAMPLES, standardize, wasserstein_to_normal
from netflux.workers import ReplicaPool

logger = logging.getLogger(__name__)

# Spawn-key tags separating the random streams of the estimators
STREAM_ES = 0
STREAM_ES_SITE = 1
STREAM_SIGMA = 2
STREAM_OUTER = 3
STREAM_BOOTSTRAP = 4
STREAM_OUTER_COPIES = 5
STREAM_INNER = 6


def variance_with_se(samples: np.ndarray) -> tuple[float, float]:
    """Unbiased sample variance and its large-sample standard error from the fourth moment."""
    n = samples.size
    centered = samples - samples.mean()
    var = float(np.sum(centered**2) / (n - 1))
    m4 = float(np.mean(centered**4))
    return var, math.sqrt(max(m4 - var**2, 0.0) / n)


def _mean_with_se(samples: np.ndarray) -> tuple[float, float]:
    se = float(samples.std(ddof=1) / math.sqrt(samples.size)) if samples.size > 1 else 0.0
    return float(samples.mean()), se


def _pick_site(seed: int, n: int) -> int:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return int(rng.integers(0, n))


@dataclass
class EfronSteinEstimate:
    var_hat: float
    var_se: float
    bound_hat: float
    bound_se: float
    n_replicas: int
    n_sites: int
    subsampled: bool
    failed: int = 0
    gammas: list[float] = field(default_factory=list, repr=False)

    def holds(self, n_se: float = 3.0) -> bool:
        """var_hat <= bound_hat + n_se combined standard errors."""
        return self.var_hat <= self.bound_hat + n_se * math.hypot(self.var_se, self.bound_se)

    def to_dict(self) -> dict:
        data = asdict(self)
        data.pop("gammas")
        return data


def efron_stein_estimate(
    config: FieldConfig,
    n_replicas: int,
    beta: float = 0.0,
    solve_cfg: Optional[SolveConfig] = None,
    seed: int = 0,
    subsample_j: bool = False,
    workers: int = 1,
    failure_budget: float = 0.0,
    writer: Optional[RecordWriter] = None,
) -> EfronSteinEstimate:
    """
    Estimate Var Gamma and the Efron-Stein bound (1/2) sum_j E |Delta_j Gamma|^2.

    Each replica draws (Z, Z') and resamples every site once. With
    subsample_j one uniform site per replica is used and its square scaled
    by the number of sites n, which is unbiased by stationarity.

    Args:
        config: Field configuration
        n_replicas: Number of independent replicas, at least 2
        beta: Mass term
        solve_cfg: Solver configuration
        seed: Master seed
        subsample_j: Use one site per replica
        workers: Worker threads
        failure_budget: Fraction of replicas allowed to fail
        writer: Optional sink for every DifferenceRecord
    """
    if n_replicas < 2:
        raise PreconditionError(f"Efron-Stein estimation needs at least 2 replicas, got {n_replicas}")
    solve_cfg = solve_cfg or SolveConfig()

    def run(i: int):
        t = ResampleTriple.sample(config, derive_seed(seed, STREAM_ES, i), beta, solve_cfg)
        sites = t.z.site_indices()
        if subsample_j:
            chosen = [sites[_pick_site(derive_seed(seed, STREAM_ES_SITE, i), len(sites))]]
            scale = float(len(sites))
        else:
            chosen = sites
            scale = 1.0
        squares = 0.0
        for j in chosen:
            record = delta_j_record(t, j)
            squares += record.delta_gamma**2
            if writer is not None:
                writer.write(record)
        return t.gamma(), scale * squares

    pool = ReplicaPool(workers, failure_budget)
    results = [r for r in pool.map(run, list(range(n_replicas)), describe=lambda i: f"replica {i}") if r is not None]
    gammas = np.array([r[0] for r in results])
    squares = np.array([r[1] for r in results])

    var_hat, var_se = variance_with_se(gammas)
    mean_squares, squares_se = _mean_with_se(squares)
    estimate = EfronSteinEstimate(
        var_hat=var_hat,
        var_se=var_se,
        bound_hat=0.5 * mean_squares,
        bound_se=0.5 * squares_se,
        n_replicas=len(results),
        n_sites=len(sample_latent(config, 0).site_indices()),
        subsampled=subsample_j,
        failed=len(pool.failed),
        gammas=gammas.tolist(),
    )
    logger.info(
        "Efron-Stein: var %.4g +- %.2g, bound %.4g +- %.2g over %d replicas",
        estimate.var_hat,
        estimate.var_se,
        estimate.bound_hat,
        estimate.bound_se,
        estimate.n_replicas,
    )
    return estimate


@dataclass
class McParams:
    """Sample sizes of the normal approximation bound audit."""

    outer_replicas: int = 1000
    inner_samples: int = 64
    sigma_replicas: int = 1000
    # Estimate the cubic term from one uniform site per replica, scaled by L^d
    subsample_j: bool = False
    bootstrap: int = 200

    MIN_OUTER = 10
    MIN_INNER = 2

    def __post_init__(self):
        for name in ("outer_replicas", "inner_samples", "sigma_replicas"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.bootstrap < 0:
            raise ConfigError(f"bootstrap must be non-negative, got {self.bootstrap}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class NormalBoundEstimate:
    mean_gamma: float
    sigma: float
    term1: float
    term1_se: float
    term2: float
    term2_se: float
    dw_bound: float
    dw_bound_se: float
    dw_empirical: float
    dw_empirical_se: float
    # Var E[T | Z] from the spread of inner means, and after removing inner noise
    cond_var_naive: float
    cond_var_debiased: float
    n_outer: int
    n_inner: int
    n_sigma: int
    degenerate: bool = False
    subsampled: bool = False

    @property
    def combined_se(self) -> float:
        empirical_se = self.dw_empirical_se if math.isfinite(self.dw_empirical_se) else 0.0
        return math.hypot(self.dw_bound_se, empirical_se)

    def holds(self, n_se: float = 3.0) -> bool:
        """dW_empirical <= term1 + term2 + n_se combined standard errors."""
        if self.degenerate:
            return True
        return self.dw_empirical <= self.dw_bound + n_se * self.combined_se

    def to_dict(self) -> dict:
        return asdict(self)


def _bootstrap_dw(gammas: np.ndarray, rounds: int, seed: int) -> float:
    if rounds < 2:
        return float("nan")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    values = []
    for _ in range(rounds):
        standardized, degenerate = standardize(gammas[rng.integers(0, gammas.size, gammas.size)])
        if not degenerate:
            values.append(wasserstein_to_normal(standardized))
    return float(np.std(values, ddof=1)) if len(values) > 1 else float("nan")


def normal_bound_estimate(
    config: FieldConfig,
    params: McParams,
    beta: float = 0.0,
    solve_cfg: Optional[SolveConfig] = None,
    seed: int = 0,
    workers: int = 1,
    failure_budget: float = 0.0,
) -> NormalBoundEstimate:
    """
    Audit d_W(W, Y) <= term1 + term2 for W = (Gamma - m) / sigma.

    term1 = (1 / (2 sigma^3)) sum_j E |Delta_j Gamma|^3 and
    term2 = (2 / sigma^2) Var(E[T | Z])^(1/2). E[T | Z] is estimated per
    outer replica from inner draws of (Z', j, A); the inner draws are split
    in two halves and Var E[T | Z] is estimated by the covariance of the two
    half means, which removes the inner sampling noise.

    Raises:
        PreconditionError: sample counts below McParams minima
    """
    if params.outer_replicas < params.MIN_OUTER:
        raise PreconditionError(f"Need at least {params.MIN_OUTER} outer replicas, got {params.outer_replicas}")
    if params.inner_samples < params.MIN_INNER:
        raise PreconditionError(f"Need at least {params.MIN_INNER} inner samples, got {params.inner_samples}")
    if params.sigma_replicas < MIN_SAMPLES:
        raise PreconditionError(f"Need at least {MIN_SAMPLES} sigma replicas, got {params.sigma_replicas}")
    solve_cfg = solve_cfg or SolveConfig()
    pool = ReplicaPool(workers, failure_budget)

    def sigma_task(i: int) -> float:
        z = sample_latent(config, derive_seed(seed, STREAM_SIGMA, i))
        return solve_corrector(realize(z, config), beta, solve_cfg).gamma

    gammas = np.array(
        [g for g in pool.map(sigma_task, list(range(params.sigma_replicas)), describe=lambda i: f"sigma replica {i}") if g is not None]
    )
    var, var_se = variance_with_se(gammas)
    standardized, degenerate = standardize(gammas)
    inner = params.inner_samples - params.inner_samples % 2
    if degenerate or var <= 0.0:
        logger.info("Gamma is degenerate (variance %.3g); no normal approximation", var)
        return NormalBoundEstimate(
            mean_gamma=float(gammas.mean()),
            sigma=0.0,
            term1=0.0,
            term1_se=0.0,
            term2=0.0,
            term2_se=0.0,
            dw_bound=0.0,
            dw_bound_se=0.0,
            dw_empirical=float("nan"),
            dw_empirical_se=float("nan"),
            cond_var_naive=0.0,
            cond_var_debiased=0.0,
            n_outer=0,
            n_inner=inner,
            n_sigma=gammas.size,
            degenerate=True,
            subsampled=params.subsample_j,
        )
    sigma = math.sqrt(var)
    dw_empirical = wasserstein_to_normal(standardized)
    dw_empirical_se = _bootstrap_dw(gammas, params.bootstrap, derive_seed(seed, STREAM_BOOTSTRAP))

    def outer_task(i: int):
        z = sample_latent(config, derive_seed(seed, STREAM_OUTER, i))
        t = ResampleTriple.around(z, config, derive_seed(seed, STREAM_OUTER_COPIES, i), beta, solve_cfg)
        sites = z.site_indices()
        if params.subsample_j:
            j = sites[_pick_site(derive_seed(seed, STREAM_ES_SITE, i), len(sites))]
            cubes = len(sites) * abs(delta_j_gamma_direct(t, j)) ** 3
        else:
            cubes = sum(abs(delta_j_gamma_direct(t, j)) ** 3 for j in sites)
        draws = np.array(
            [
                t_statistic_sample(z, config, beta, solve_cfg, derive_seed(seed, STREAM_INNER, i, r), gamma_z=t.gamma())
                for r in range(inner)
            ]
        )
        return cubes, draws

    outcomes = [
        o for o in pool.map(outer_task, list(range(params.outer_replicas)), describe=lambda i: f"outer replica {i}") if o is not None
    ]
    cubes = np.array([o[0] for o in outcomes])
    draws = np.stack([o[1] for o in outcomes])

    rel_var_se = var_se / var
    cubes_mean, cubes_se = _mean_with_se(cubes)
    term1 = cubes_mean / (2.0 * sigma**3)
    term1_se = math.hypot(cubes_se / (2.0 * sigma**3), 1.5 * term1 * rel_var_se)

    half = inner // 2
    first, second = draws[:, :half].mean(axis=1), draws[:, half:].mean(axis=1)
    products = (first - first.mean()) * (second - second.mean())
    n_outer = products.size
    cond_var = float(np.sum(products) / (n_outer - 1))
    cond_var_se = float(products.std(ddof=1) / math.sqrt(n_outer))
    cond_var_debiased = max(cond_var, 0.0)
    root = math.sqrt(cond_var_debiased)
    # Delta method for the square root; conservative when the estimate sits at zero
    root_se = cond_var_se / (2.0 * root) if root > 0 else math.sqrt(cond_var_se)
    term2 = 2.0 * root / var
    term2_se = math.hypot(2.0 * root_se / var, term2 * rel_var_se)

    estimate = NormalBoundEstimate(
        mean_gamma=float(gammas.mean()),
        sigma=sigma,
        term1=term1,
        term1_se=term1_se,
        term2=term2,
        term2_se=term2_se,
        dw_bound=term1 + term2,
        dw_bound_se=math.hypot(term1_se, term2_se),
        dw_empirical=dw_empirical,
        dw_empirical_se=dw_empirical_se,
        cond_var_naive=float(draws.mean(axis=1).var(ddof=1)),
        cond_var_debiased=cond_var_debiased,
        n_outer=n_outer,
        n_inner=inner,
        n_sigma=gammas.size,
        subsampled=params.subsample_j,
    )
    logger.info(
        "Normal bound: dW %.4g <= %.4g + %.4g (term1 + term2)",
        estimate.dw_empirical,
        estimate.term1,
        estimate.term2,
    )
    return estimate
