import itertools

import numpy as np
import pytest

from netflux.errors import CampaignError, ConfigError, PreconditionError, SolverError
from netflux.fields.config import FieldConfig
from netflux.fields.latent import sample_latent
from netflux.resample.differences import (
    ResampleTriple,
    delta_j_gamma_direct,
    delta_j_gamma_local,
    delta_j_record,
    delta_kj_gamma,
    t_statistic_sample,
)
from netflux.resample.estimates import (
    McParams,
    efron_stein_estimate,
    normal_bound_estimate,
    variance_with_se,
)
from netflux.resample.records import RecordWriter, read_records
from netflux.resample.subsets import (
    chatterjee_identity_exact,
    enumerate_subsets,
    sample_subset_A,
    subset_weight,
)
from netflux.solver.cg import SolveConfig
from netflux.workers import ReplicaPool

TIGHT = SolveConfig(rel_tolerance=1e-11)


@pytest.fixture
def config():
    return FieldConfig(model="checkerboard", d=2, L=2, m=2, law="uniform", a_lo=1.0, a_hi=4.0)


@pytest.fixture
def triple(config):
    return ResampleTriple.sample(config, 5, 0.0, TIGHT)


def test_subset_weights():
    weights = {subset: weight for subset, weight in enumerate_subsets(3, 0)}
    assert weights == pytest.approx(
        {frozenset(): 1 / 3, frozenset({1}): 1 / 6, frozenset({2}): 1 / 6, frozenset({1, 2}): 1 / 3}
    )


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_subset_weights_sum_to_one(n):
    assert sum(weight for _, weight in enumerate_subsets(n, n - 1)) == pytest.approx(1.0)


def test_subset_weight_rejects_full_set():
    with pytest.raises(PreconditionError):
        subset_weight(3, 3)


def test_subset_sampler_frequencies():
    rng = np.random.default_rng(0)
    draws = 60000
    counts = {}
    for _ in range(draws):
        subset = sample_subset_A(3, 0, rng)
        counts[subset] = counts.get(subset, 0) + 1
    for subset, weight in enumerate_subsets(3, 0):
        se = np.sqrt(weight * (1 - weight) / draws)
        assert abs(counts[subset] / draws - weight) <= 4 * se


def test_chatterjee_identity_single_bit():
    lhs, rhs = chatterjee_identity_exact(lambda z: z[0], lambda z: z[0], 2, 0.5)
    assert lhs == pytest.approx(0.25)
    assert rhs == pytest.approx(0.25)


def test_chatterjee_identity_constant_and_independent():
    assert chatterjee_identity_exact(lambda z: z[0], lambda z: 3.0, 3, 0.3) == pytest.approx((0.0, 0.0))
    lhs, rhs = chatterjee_identity_exact(lambda z: z[0], lambda z: z[1], 2, 0.3)
    assert lhs == pytest.approx(0.0, abs=1e-15)
    assert rhs == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("q", [0.3, 0.5])
def test_chatterjee_identity_random_functions(n, q):
    rng = np.random.default_rng(n * 10 + int(q * 10))
    states = list(itertools.product((0, 1), repeat=n))
    for _ in range(5):
        g_table = dict(zip(states, rng.standard_normal(len(states))))
        f_table = dict(zip(states, rng.standard_normal(len(states))))
        lhs, rhs = chatterjee_identity_exact(g_table.__getitem__, f_table.__getitem__, n, q)
        assert abs(lhs - rhs) <= 1e-12


def test_chatterjee_identity_limits():
    with pytest.raises(PreconditionError):
        chatterjee_identity_exact(lambda z: 0.0, lambda z: 0.0, 5, 0.5)
    with pytest.raises(PreconditionError):
        chatterjee_identity_exact(lambda z: 0.0, lambda z: 0.0, 2, 1.5)


def test_states_of_a_triple(triple):
    j, k = (0, 1), (1, 1)
    assert triple.state({j}).payload(j) == triple.z_prime.payload(j)
    assert triple.state(k={k}).payload(k) == triple.z_dprime.payload(k)
    both = triple.state({j}, {k})
    assert both.payload(j) == triple.z_prime.payload(j)
    assert both.payload(k) == triple.z_dprime.payload(k)
    assert both.payload((0, 0)) == triple.z.payload((0, 0))


@pytest.mark.parametrize("beta", [0.0, 0.25])
def test_local_identity_matches_direct_difference(config, beta):
    t = ResampleTriple.sample(config, 7, beta, TIGHT)
    for j in t.z.site_indices():
        direct = delta_j_gamma_direct(t, j)
        local = delta_j_gamma_local(t, j)
        assert abs(direct - local) <= 1e-7 * t.gamma()


def test_deterministic_model_has_no_differences():
    config = FieldConfig(model="checkerboard", d=2, L=2, m=2, p=1.0)
    t = ResampleTriple.sample(config, 3, 0.0, TIGHT)
    assert delta_j_gamma_direct(t, (1, 0)) == 0.0
    assert t_statistic_sample(t.z, config, 0.0, TIGHT, 9) == 0.0


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_deljg_bound_holds(config, seed):
    t = ResampleTriple.sample(config, seed, 0.0, TIGHT)
    for j in t.z.site_indices():
        record = delta_j_record(t, j)
        assert record.violations() == []
        assert record.deljg_lhs <= record.deljg_rhs


def test_second_difference_is_symmetric(config):
    t = ResampleTriple.sample(config, 11, 0.0, TIGHT)
    swapped = ResampleTriple(t.z, t.z_dprime, t.z_prime, config, 0.0, TIGHT)
    j, k = (0, 0), (1, 0)
    assert delta_kj_gamma(t, k, j).delta2_gamma == delta_kj_gamma(swapped, j, k).delta2_gamma


def test_second_difference_vanishes_without_resampling_k(config):
    z, z_prime = sample_latent(config, 1), sample_latent(config, 2)
    t = ResampleTriple(z, z_prime, z, config, 0.0, TIGHT)
    assert delta_kj_gamma(t, (1, 1), (0, 0)).delta2_gamma == 0.0


def test_far_field_bound():
    config = FieldConfig(model="checkerboard", d=2, L=6, m=1, law="uniform", a_lo=1.0, a_hi=4.0)
    t = ResampleTriple.sample(config, 4, 0.0, TIGHT)
    record = delta_kj_gamma(t, (3, 3), (0, 0))
    assert record.far_applicable
    assert record.distance == pytest.approx(3 * np.sqrt(2))
    assert record.violations() == []


def test_near_pairs_skip_the_far_bound(config):
    t = ResampleTriple.sample(config, 6, 0.0, TIGHT)
    record = delta_kj_gamma(t, (1, 0), (0, 0))
    assert not record.far_applicable
    assert "far" not in record.violations()
    assert record.near_lhs <= record.near_rhs


def test_t_statistic_is_reproducible(config):
    z = sample_latent(config, 8)
    first = t_statistic_sample(z, config, 0.0, TIGHT, 123)
    assert t_statistic_sample(z, config, 0.0, TIGHT, 123) == first


def test_variance_with_se():
    samples = np.random.default_rng(3).standard_normal(500)
    var, se = variance_with_se(samples)
    assert var == pytest.approx(np.var(samples, ddof=1))
    assert 0 < se < 0.2


def test_efron_stein_on_deterministic_field():
    config = FieldConfig(model="checkerboard", d=2, L=2, m=2, p=1.0)
    estimate = efron_stein_estimate(config, 4, solve_cfg=TIGHT)
    assert estimate.var_hat == 0.0
    assert estimate.bound_hat == 0.0
    assert estimate.holds()


def test_efron_stein_needs_two_replicas(config):
    with pytest.raises(PreconditionError):
        efron_stein_estimate(config, 1)


def test_efron_stein_bound_holds(config):
    estimate = efron_stein_estimate(config, 60, seed=2)
    assert estimate.n_replicas == 60
    assert estimate.n_sites == 4
    assert estimate.holds()


def test_efron_stein_matches_series_delta_method():
    config = FieldConfig(model="series_resistor", d=1, L=16, m=1, a_lo=1.0, a_hi=3.0, p=0.5)
    estimate = efron_stein_estimate(config, 200, seed=1, subsample_j=True)
    inverse = np.array([1.0, 1.0 / 3.0])
    mean = inverse.mean()
    oracle = inverse.var() / (config.L * mean**4)
    assert 0.25 <= estimate.bound_hat / oracle <= 4.0


def test_efron_stein_streams_records(config, tmp_path):
    path = tmp_path / "records.jsonl"
    with RecordWriter(path) as writer:
        efron_stein_estimate(config, 3, writer=writer)
        assert writer.count == 12
    records = read_records(path)
    assert len(records) == 12
    assert {tuple(r["j"]) for r in records} == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_efron_stein_is_independent_of_workers(config):
    serial = efron_stein_estimate(config, 6, seed=4)
    threaded = efron_stein_estimate(config, 6, seed=4, workers=3)
    assert serial.gammas == threaded.gammas
    assert serial.bound_hat == threaded.bound_hat


def test_normal_bound_on_deterministic_field():
    config = FieldConfig(model="checkerboard", d=2, L=2, m=2, p=1.0)
    params = McParams(outer_replicas=10, inner_samples=2, sigma_replicas=100, bootstrap=0)
    estimate = normal_bound_estimate(config, params)
    assert estimate.degenerate
    assert estimate.holds()


@pytest.mark.parametrize(
    "params",
    [
        McParams(outer_replicas=5, inner_samples=4, sigma_replicas=100),
        McParams(outer_replicas=10, inner_samples=1, sigma_replicas=100),
        McParams(outer_replicas=10, inner_samples=4, sigma_replicas=50),
    ],
)
def test_normal_bound_preconditions(config, params):
    with pytest.raises(PreconditionError):
        normal_bound_estimate(config, params)


@pytest.mark.slow
def test_normal_bound_on_series():
    config = FieldConfig(model="series_resistor", d=1, L=8, m=1, a_lo=1.0, a_hi=3.0)
    params = McParams(outer_replicas=20, inner_samples=4, sigma_replicas=200, bootstrap=20)
    estimate = normal_bound_estimate(config, params, seed=3)
    assert not estimate.degenerate
    assert estimate.term1 > 0
    assert estimate.term2 >= 0
    assert estimate.dw_bound == pytest.approx(estimate.term1 + estimate.term2)
    assert 0 <= estimate.dw_empirical < 1


def test_pool_keeps_task_order():
    pool = ReplicaPool(workers=3)
    assert pool.map(lambda x: x * x, list(range(20))) == [x * x for x in range(20)]


def _fail_first(x):
    if x == 0:
        raise SolverError("no convergence")
    return x


def test_pool_failure_budget():
    pool = ReplicaPool(workers=2, failure_budget=0.5)
    assert pool.map(_fail_first, [0, 1, 2, 3]) == [None, 1, 2, 3]
    assert pool.failed == [0]
    with pytest.raises(CampaignError):
        ReplicaPool(workers=1).map(_fail_first, [0, 1, 2, 3])


def _fail_on_even(x):
    if x % 2 == 0:
        raise ValueError(f"bad task {x}")
    return x


@pytest.mark.parametrize("workers", [1, 2])
def test_pool_reraises_unexpected_errors(workers):
    pool = ReplicaPool(workers=workers, failure_budget=0.5)
    with pytest.raises(ValueError):
        pool.map(_fail_on_even, list(range(10)))
    assert pool.failed == []


def test_pool_rejects_zero_workers():
    with pytest.raises(ConfigError):
        ReplicaPool(workers=0)


def test_normal_bound_reports_subsampling(config):
    params = McParams(outer_replicas=10, inner_samples=2, sigma_replicas=100, bootstrap=0, subsample_j=True)
    estimate = normal_bound_estimate(config, params, seed=1)
    assert estimate.subsampled
    assert not estimate.degenerate
    assert estimate.term1 > 0


@pytest.mark.slow
def test_normal_bound_holds_on_checkerboard(config):
    params = McParams(outer_replicas=40, inner_samples=4, sigma_replicas=200, bootstrap=20)
    estimate = normal_bound_estimate(config, params, seed=6)
    assert not estimate.degenerate
    assert not estimate.subsampled
    assert estimate.holds()


@pytest.mark.slow
def test_efron_stein_errors_shrink_with_replicas(config):
    small = efron_stein_estimate(config, 400, seed=8, subsample_j=True)
    large = efron_stein_estimate(config, 1600, seed=8, subsample_j=True)
    assert 1.4 <= small.var_se / large.var_se <= 2.8
