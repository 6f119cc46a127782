"""Single and double resampling differences of the flux Gamma."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from netflux.fields.config import FieldConfig
from netflux.fields.geometry import ball_mask, cube_mask, lattice_distance
from netflux.fields.latent import Index, LatentState, derive_seed, replace_sites, sample_latent
from netflux.fields.realize import CoefficientField, realize
from netflux.resample.subsets import sample_subset_A
from netflux.solver.cg import SolveConfig
from netflux.solver.corrector import CorrectorSolution, phi_energies, solve_corrector
from netflux.solver.operator import assemble, face_gradient, harmonic_faces

logger = logging.getLogger(__name__)

StateKey = tuple[frozenset, frozenset]


@dataclass
class ResampleTriple:
    """
    Z together with two independent copies Z' and Z''.

    state(A, K) is Z with the sites in K taken from Z'' and then the sites
    in A taken from Z', so Z^j = state({j}, {}) and Z^k = state({}, {k}).
    Solves are cached per (A, K).
    """

    z: LatentState
    z_prime: LatentState
    z_dprime: LatentState
    config: FieldConfig
    beta: float
    solve_cfg: SolveConfig
    _cache: dict = field(default_factory=dict, repr=False)
    _gammas: dict = field(default_factory=dict, repr=False)

    @classmethod
    def sample(
        cls, config: FieldConfig, seed: int, beta: float, solve_cfg: SolveConfig
    ) -> ResampleTriple:
        """Draw Z, Z' and Z'' from independent streams of seed."""
        z, z_prime, z_dprime = (sample_latent(config, derive_seed(seed, i)) for i in range(3))
        return cls(z, z_prime, z_dprime, config, beta, solve_cfg)

    @classmethod
    def around(
        cls, z: LatentState, config: FieldConfig, seed: int, beta: float, solve_cfg: SolveConfig
    ) -> ResampleTriple:
        """Keep Z and draw fresh copies Z' and Z''."""
        z_prime, z_dprime = (sample_latent(config, derive_seed(seed, i)) for i in (1, 2))
        return cls(z, z_prime, z_dprime, config, beta, solve_cfg)

    @property
    def n_sites(self) -> int:
        return len(self.z.site_indices())

    def state(self, a=frozenset(), k=frozenset()) -> LatentState:
        return replace_sites(replace_sites(self.z, self.z_dprime, k), self.z_prime, a)

    def coefficients(self, a=frozenset(), k=frozenset()) -> CoefficientField:
        return self._solved(frozenset(a), frozenset(k))[0]

    def solution(self, a=frozenset(), k=frozenset()) -> CorrectorSolution:
        return self._solved(frozenset(a), frozenset(k))[1]

    def gamma(self, a=frozenset(), k=frozenset()) -> float:
        key: StateKey = (frozenset(a), frozenset(k))
        if key not in self._gammas:
            self._gammas[key] = self.solution(*key).gamma
        return self._gammas[key]

    def remember_gamma(self, value: float, a=frozenset(), k=frozenset()):
        """Seed the cache with a Gamma already computed elsewhere for state(a, k)."""
        self._gammas[(frozenset(a), frozenset(k))] = float(value)

    def _solved(self, a: frozenset, k: frozenset) -> tuple[CoefficientField, CorrectorSolution]:
        key: StateKey = (a, k)
        if key not in self._cache:
            coefficient = realize(self.state(a, k), self.config)
            self._cache[key] = (coefficient, solve_corrector(coefficient, self.beta, self.solve_cfg))
        return self._cache[key]


@dataclass
class DifferenceRecord:
    """One Delta_j Gamma (and optionally Delta_k Delta_j Gamma) with its bound audits."""

    j: Index
    delta_gamma: float
    deljg_lhs: float
    deljg_rhs: float
    phi_energies: dict[str, float] = field(default_factory=dict)
    k: Optional[Index] = None
    delta2_gamma: Optional[float] = None
    distance: Optional[float] = None
    near_lhs: Optional[float] = None
    near_rhs: Optional[float] = None
    # The far-field bound only applies when Delta_j a is untouched by resampling k
    far_applicable: Optional[bool] = None
    far_lhs: Optional[float] = None
    far_rhs: Optional[float] = None

    def violations(self, rel_slack: float = 1e-9) -> list[str]:
        """Names of the bounds this record breaks."""
        checks = [("deljg", self.deljg_lhs, self.deljg_rhs)]
        if self.near_lhs is not None:
            checks.append(("near", self.near_lhs, self.near_rhs))
        if self.far_applicable:
            checks.append(("far", self.far_lhs, self.far_rhs))
        return [name for name, lhs, rhs in checks if lhs > rhs * (1.0 + rel_slack) + 1e-14]

    def to_dict(self) -> dict:
        data = {
            "j": list(self.j),
            "delta_gamma": self.delta_gamma,
            "deljg_lhs": self.deljg_lhs,
            "deljg_rhs": self.deljg_rhs,
            "phi_energies": dict(self.phi_energies),
        }
        if self.k is not None:
            data.update(
                k=list(self.k),
                delta2_gamma=self.delta2_gamma,
                distance=self.distance,
                near_lhs=self.near_lhs,
                near_rhs=self.near_rhs,
                far_applicable=self.far_applicable,
                far_lhs=self.far_lhs,
                far_rhs=self.far_rhs,
            )
        return data


def deljg_constant(config: FieldConfig) -> float:
    """C = (a^* - a_*) max(1, a^*/a_*) bounding L^d |Delta_j Gamma| by local energies."""
    a_lo, a_hi = config.ellipticity_bounds()
    return (a_hi - a_lo) * max(1.0, a_hi / a_lo)


def far_field_constant(config: FieldConfig) -> float:
    a_lo, a_hi = config.ellipticity_bounds()
    return 8.0 * (a_hi - a_lo) ** 2


def _index(j) -> Index:
    return tuple(int(i) for i in j)


def delta_j_gamma_direct(t: ResampleTriple, j) -> float:
    """Gamma(Z^j) - Gamma(Z) from two full solves."""
    j = _index(j)
    return t.gamma({j}) - t.gamma()


def _local_sum(
    field_a: CoefficientField,
    sol_a: CorrectorSolution,
    field_b: CoefficientField,
    sol_b: CorrectorSolution,
) -> float:
    """sum over faces where kf changes of h^d (D phi_b + e_1) (kf_b - kf_a) (D phi_a + e_1)."""
    h = field_a.h
    total = 0.0
    for ax, (kf_a, kf_b) in enumerate(zip(harmonic_faces(field_a.values), harmonic_faces(field_b.values))):
        change = kf_b - kf_a
        support = change != 0.0
        if not np.any(support):
            continue
        g_a = face_gradient(sol_a.phi, h, ax)
        g_b = face_gradient(sol_b.phi, h, ax)
        if ax == 0:
            g_a = g_a + 1.0
            g_b = g_b + 1.0
        total += float(np.sum(g_b[support] * change[support] * g_a[support]))
    return total * field_a.cell_volume


def delta_j_gamma_local(t: ResampleTriple, j) -> float:
    """
    Delta_j Gamma through the local identity
    L^d Delta_j Gamma = int (grad phi^j + e_1) . (Delta_j a) (grad phi + e_1),
    summed only over the faces where the conductivity changed.
    """
    j = _index(j)
    field_0, sol_0 = t.coefficients(), t.solution()
    field_j, sol_j = t.coefficients({j}), t.solution({j})
    return _local_sum(field_0, sol_0, field_j, sol_j) / field_0.volume


def _hat_phi(t: ResampleTriple, j: Index, a=frozenset(), k=frozenset()) -> float:
    return phi_energies(t.solution(a, k), t.coefficients(a, k), j, t.config.tau)[1]


def delta_j_record(t: ResampleTriple, j) -> DifferenceRecord:
    """Delta_j Gamma with the local energy bound L^d |Delta_j Gamma| <= C (hatPhi_j(Z)^2 + hatPhi_j(Z^j)^2)."""
    j = _index(j)
    delta = delta_j_gamma_direct(t, j)
    energies = {"Z": _hat_phi(t, j), "Zj": _hat_phi(t, j, {j})}
    volume = t.coefficients().volume
    return DifferenceRecord(
        j=j,
        delta_gamma=delta,
        deljg_lhs=volume * abs(delta),
        deljg_rhs=deljg_constant(t.config) * (energies["Z"] ** 2 + energies["Zj"] ** 2),
        phi_energies=energies,
    )


def _ball_energy(field: CoefficientField, w: np.ndarray, region: np.ndarray) -> float:
    density = assemble(field, 0.0).energy_density(w, add_e1=False)
    return float(np.sum(density[region])) * field.cell_volume


def delta_kj_gamma(t: ResampleTriple, k, j) -> DifferenceRecord:
    """
    Second difference Delta_k Delta_j Gamma from the four solves Z, Z^j, Z^k, Z^{jk}.

    The combination is formed as (Gamma_jk + Gamma_0) - (Gamma_j + Gamma_k),
    which does not depend on the order in which j and k are taken.
    """
    j, k = _index(j), _index(k)
    a, kk = frozenset({j}), frozenset({k})
    gamma_0, gamma_j = t.gamma(), t.gamma(a)
    gamma_k, gamma_jk = t.gamma(k=kk), t.gamma(a, kk)
    delta2 = (gamma_jk + gamma_0) - (gamma_j + gamma_k)
    delta = gamma_j - gamma_0

    energies = {
        "Z": _hat_phi(t, j),
        "Zj": _hat_phi(t, j, a),
        "Zk": _hat_phi(t, j, k=kk),
        "Zjk": _hat_phi(t, j, a, kk),
    }
    squares = sum(e**2 for e in energies.values())
    volume = t.coefficients().volume
    c = deljg_constant(t.config)

    # Does resampling k leave Delta_j of the face conductivities untouched?
    untouched = True
    for kf_0, kf_j, kf_k, kf_jk in zip(
        harmonic_faces(t.coefficients().values),
        harmonic_faces(t.coefficients(a).values),
        harmonic_faces(t.coefficients(k=kk).values),
        harmonic_faces(t.coefficients(a, kk).values),
    ):
        if not np.array_equal(kf_jk - kf_k, kf_j - kf_0):
            untouched = False
            break

    distance = lattice_distance(j, k, t.config.L)
    far_applicable = untouched and distance >= 2.0 * t.config.tau
    field_0 = t.coefficients()
    region = ball_mask(field_0.d, field_0.n, field_0.h, field_0.L, j, t.config.tau)
    region |= cube_mask(field_0.d, field_0.m, field_0.L, j)
    w = t.solution(k=kk).phi - t.solution().phi
    w_j = t.solution(a, kk).phi - t.solution(a).phi
    gradient_energy = _ball_energy(field_0, w, region) + _ball_energy(field_0, w_j, region)

    return DifferenceRecord(
        j=j,
        k=k,
        delta_gamma=delta,
        delta2_gamma=delta2,
        distance=distance,
        deljg_lhs=volume * abs(delta),
        deljg_rhs=c * (energies["Z"] ** 2 + energies["Zj"] ** 2),
        phi_energies=energies,
        near_lhs=volume * abs(delta2),
        near_rhs=c * squares,
        far_applicable=far_applicable,
        far_lhs=(volume * delta2) ** 2,
        far_rhs=far_field_constant(t.config) * squares * gradient_energy,
    )


def t_statistic_sample(
    z: LatentState,
    config: FieldConfig,
    beta: float,
    solve_cfg: SolveConfig,
    seed: int,
    gamma_z: Optional[float] = None,
) -> float:
    """
    One draw of (n/2) Delta_j Gamma(Z) Delta_j Gamma(Z^A) with Z' fresh,
    j uniform over the n sites and A ~ K_{n,.}; its mean given Z is E[T | Z].

    Args:
        z: The outer latent state
        config: Field configuration
        beta: Mass term
        solve_cfg: Solver configuration
        seed: Seed of this inner draw
        gamma_z: Gamma(Z) if already known
    """
    t = ResampleTriple.around(z, config, seed, beta, solve_cfg)
    if gamma_z is not None:
        t.remember_gamma(gamma_z)
    sites = z.site_indices()
    n = len(sites)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(3,))))
    position = int(rng.integers(0, n))
    subset = frozenset(sites[i] for i in sample_subset_A(n, position, rng))
    j = sites[position]

    delta_z = t.gamma({j}) - t.gamma()
    if delta_z == 0.0:
        return 0.0
    delta_za = t.gamma(subset | {j}) - t.gamma(subset)
    return 0.5 * n * delta_z * delta_za
