import math

import numpy as np
import pytest

from netflux.errors import PreconditionError
from netflux.fields.config import FieldConfig
from netflux.fields.geometry import cube_mask
from netflux.fields.latent import sample_latent, with_site
from netflux.fields.realize import CoefficientField, realize
from netflux.greens.green import (
    DecayBin,
    GreenFunction,
    annulus_gradient_energy_2d,
    apply_green,
    decay_profile_3d,
    dense_spectral_green,
    dyadic_monotone,
    free_space_constant,
    green_matrix,
    solve_green,
    write_decay_csv,
)
from netflux.greens.representation import green_representation_ratio
from netflux.solver.cg import SolveConfig, conjugate_gradient
from netflux.solver.operator import assemble

TIGHT = SolveConfig(rel_tolerance=1e-12)


@pytest.fixture
def small_field():
    config = FieldConfig(model="checkerboard", d=2, L=2, m=4, law="uniform", a_lo=1.0, a_hi=4.0)
    return realize(sample_latent(config, 17), config)


def test_green_has_zero_mean(small_field):
    g = solve_green(small_field, 0.0, (1, 2), TIGHT)
    assert abs(float(np.mean(g.values))) <= 1e-12


def test_green_is_symmetric(small_field):
    cells = [(0, 0), (3, 5), (7, 1)]
    greens = {y: solve_green(small_field, 0.0, y, TIGHT) for y in cells}
    for x in cells:
        for y in cells:
            assert abs(greens[y].at(x) - greens[x].at(y)) <= 1e-8


@pytest.mark.parametrize("beta", [0.0, 0.25])
@pytest.mark.parametrize("constant", [True, False])
def test_green_matches_spectral_oracle(small_field, beta, constant):
    field = CoefficientField.constant(1.0, d=2, L=2, m=4) if constant else small_field
    y = (2, 6)
    g = solve_green(field, beta, y, TIGHT)
    oracle = dense_spectral_green(field, beta, y)
    assert np.max(np.abs(g.values - oracle)) <= 1e-8


def test_green_reproduces_solutions():
    config = FieldConfig(model="checkerboard", d=2, L=2, m=2, law="uniform")
    field = realize(sample_latent(config, 4), config)
    matrix = green_matrix(field, 0.0, TIGHT)
    f = np.random.default_rng(1).standard_normal(field.values.shape)
    f -= f.mean()
    direct, _, _ = conjugate_gradient(assemble(field, 0.0), field.cell_volume * f, TIGHT)
    assert np.max(np.abs(apply_green(matrix, field, f) - direct)) <= 1e-8


def test_doubling_conductivity_halves_green(small_field):
    doubled = CoefficientField(
        values=2.0 * small_field.values, h=small_field.h, d=2, L=small_field.L, m=small_field.m
    )
    g = solve_green(small_field, 0.0, (0, 0), TIGHT)
    g2 = solve_green(doubled, 0.0, (0, 0), TIGHT)
    assert np.allclose(g2.values, 0.5 * g.values, rtol=1e-9, atol=1e-12)


def test_source_outside_grid(small_field):
    with pytest.raises(PreconditionError):
        solve_green(small_field, 0.0, (8, 0), TIGHT)


def test_decay_profile_of_laplacian():
    field = CoefficientField.constant(1.0, d=3, L=4, m=2)
    g = solve_green(field, 0.0, (0, 0, 0), SolveConfig())
    profile = decay_profile_3d(g)
    assert [b.bin_lo for b in profile] == [0.5, 1.0, 2.0]
    assert sum(b.n_cells for b in profile) == field.values.size - 1
    assert all(0 < b.max_scaled_G < 0.5 for b in profile)


def test_decay_profile_needs_three_dimensions(small_field):
    g = solve_green(small_field, 0.0, (0, 0), TIGHT)
    with pytest.raises(PreconditionError):
        decay_profile_3d(g)


def test_write_decay_csv(tmp_path):
    path = tmp_path / "decay.csv"
    write_decay_csv([DecayBin(0.5, 1.0, 0.07, 26)], str(path))
    assert path.read_text().splitlines() == ["bin_lo,bin_hi,max_scaled_G,n_cells", "0.5,1.0,0.07,26"]


def test_annulus_energy_matches_oracle():
    field = CoefficientField.constant(1.0, d=2, L=4, m=2)
    g = solve_green(field, 0.0, (0, 0), TIGHT)
    oracle = GreenFunction(dense_spectral_green(field, 0.0, (0, 0)), 0.0, field, (0, 0))
    energy = annulus_gradient_energy_2d(g, (0, 0), (4, 4), 1.0)
    assert energy > 0
    assert energy == pytest.approx(annulus_gradient_energy_2d(oracle, (0, 0), (4, 4), 1.0), rel=1e-6)


def test_annulus_energy_preconditions(small_field):
    g = solve_green(small_field, 0.0, (0, 0), TIGHT)
    with pytest.raises(PreconditionError):
        annulus_gradient_energy_2d(g, (0, 0), (4, 4), 2.0)


def test_dyadic_monotone():
    def profile(maxima):
        return [DecayBin(2.0**i, 2.0 ** (i + 1), value, 1) for i, value in enumerate(maxima)]

    assert dyadic_monotone(profile([0.3, 0.09, 0.08, 0.085]))
    assert not dyadic_monotone(profile([0.3, 0.05, 0.08]))


def test_free_space_constant():
    assert free_space_constant(3) == pytest.approx(1.0 / (4.0 * math.pi))


def test_wk_is_controlled_by_the_green_function():
    config = FieldConfig(model="checkerboard", d=2, L=4, m=2, a_lo=1.0, a_hi=4.0)
    z = sample_latent(config, 2)
    k = (0, 0)
    flipped = 1.0 if z.payload(k) == 4.0 else 4.0
    field = realize(z, config)
    field_k = realize(with_site(z, k, flipped), config)
    region = cube_mask(2, 2, 4, (2, 2))
    audit = green_representation_ratio(
        field, field_k, 0.0, k, config.tau, config.ellipticity_bounds(), region, TIGHT
    )
    assert audit.region_l2 > 0
    assert 0 < audit.ratio <= 1.0
    assert 0 < audit.energy_ratio <= 1.0
    assert audit.normalized_energy == pytest.approx(audit.gradient_energy / audit.hat_phi_k**2)


def test_wk_needs_a_region(small_field):
    with pytest.raises(PreconditionError):
        green_representation_ratio(
            small_field,
            small_field,
            0.0,
            (0, 0),
            1.5,
            (1.0, 4.0),
            np.zeros(small_field.values.shape, dtype=bool),
            TIGHT,
        )


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_decay_is_dyadically_monotone_on_random_fields(seed):
    config = FieldConfig(model="checkerboard", d=3, L=8, m=2, law="uniform", a_lo=1.0, a_hi=4.0)
    field = realize(sample_latent(config, seed), config)
    g = solve_green(field, 0.0, (3, 5, 7), SolveConfig())
    # Bins reaching past L / 2 see the periodic images
    profile = [b for b in decay_profile_3d(g) if b.bin_hi <= config.L / 2]
    assert [b.bin_lo for b in profile] == [0.5, 1.0, 2.0]
    assert dyadic_monotone(profile)


@pytest.mark.slow
def test_annulus_energy_is_uniform_in_L():
    maxima = []
    for L in (4, 8):
        config = FieldConfig(model="checkerboard", d=2, L=L, m=4, law="uniform", a_lo=1.0, a_hi=4.0)
        energies = []
        for seed in range(4):
            field = realize(sample_latent(config, seed), config)
            g = solve_green(field, 0.0, (0, 0), TIGHT)
            energies.append(annulus_gradient_energy_2d(g, (0, 0), (3 * L * 4 // 8, 0), L / 8.0))
        maxima.append(max(energies))
    assert 0.25 <= maxima[1] / maxima[0] <= 4.0
