import json
from pathlib import Path

import numpy as np
import pytest

from netflux.campaign.campaigns import (
    check_budget,
    counterexample_law,
    exact_standardized_dw,
    gamma_ensemble,
    run_bound_audit,
    run_counterexample,
    run_efron_stein,
    run_greens,
    run_normality,
    run_scaling,
)
from netflux.campaign.output import COLUMNS, emit_plot_data
from netflux.campaign.spec import ExperimentResult, ExperimentSpec, SpecParser, apply_overrides
from netflux.errors import ConfigError, PreconditionError
from netflux.fields.config import FieldConfig
from netflux.main import EXIT_OK, EXIT_REFUSED, CampaignApp, main
from netflux.resample.estimates import McParams
from netflux.resample.records import RecordWriter, read_records
from netflux.settings import RunSettings, SettingsManager

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def settings():
    return RunSettings(failure_budget=0.0)


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))


def dependent_series(**changes):
    data = {
        "model": FieldConfig(model="series_resistor", d=1, L=8, p=0.5, dependent=True, m=1),
        "dims_and_sizes": [(1, 8), (1, 16)],
        "beta": 0.0,
        "replicas": 200,
        "master_seed": 3,
    }
    data.update(changes)
    return ExperimentSpec(**data)


def small_checkerboard(**changes):
    data = {
        "model": FieldConfig(model="checkerboard", d=1, L=4, law="uniform", m=1),
        "dims_and_sizes": [(1, 4), (1, 8), (1, 16)],
        "beta": 0.0,
        "replicas": 5,
        "master_seed": 11,
    }
    data.update(changes)
    return ExperimentSpec(**data)


def test_apply_overrides():
    data = apply_overrides(
        {"model": {"L": 4}},
        ["--model.L", "8", "--replicas=300", "--model.law", "uniform", "--subsample-j", "true"],
    )
    assert data == {"model": {"L": 8, "law": "uniform"}, "replicas": 300, "subsample_j": True}


@pytest.mark.parametrize("overrides", [["--replicas"], ["replicas", "3"], ["--model.L.x", "3"]])
def test_invalid_overrides(overrides):
    with pytest.raises(ConfigError):
        apply_overrides({"model": {"L": 4}}, overrides)


def test_spec_hash_tracks_content():
    spec = ExperimentSpec()
    assert spec.spec_hash() == ExperimentSpec().spec_hash()
    assert spec.spec_hash() != ExperimentSpec(replicas=201).spec_hash()
    assert spec.spec_hash() != ExperimentSpec(model=FieldConfig(a_hi=5.0)).spec_hash()


@pytest.mark.parametrize(
    "data",
    [
        {"colour": "blue"},
        {"campaigns": ["everything"]},
        {"master_seed": -1},
        {"replicas": 0},
        {"beta": -0.5},
        {"dims_and_sizes": [[4, 8]]},
        {"model": {"model": "honeycomb"}},
        {"solve": {"rel_tolerance": 0}},
        {"symmetry_pairs": 0},
    ],
)
def test_invalid_specs(data):
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict(data)


def test_default_beta_sweep():
    assert ExperimentSpec().betas_for(4) == [0.0, 1.0 / 16.0]
    assert ExperimentSpec(beta=[0.0, 0.5]).betas_for(4) == [0.0, 0.5]
    assert ExperimentSpec(beta=0.25).betas_for(4) == [0.25]


def test_spec_parser(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"model": {"model": "checkerboard", "L": 4}, "replicas": 10}))
    spec = SpecParser.load(str(path), ["--model.d", "3"])
    assert spec.model.d == 3
    assert spec.replicas == 10
    assert spec.dims_and_sizes == [(2, 4), (2, 8), (2, 16)]


def test_spec_parser_errors(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        SpecParser.load(str(path))
    with pytest.raises(ConfigError):
        SpecParser.load(str(tmp_path / "missing.json"))


def test_shipped_configs_load():
    for path in sorted(CONFIGS.glob("*.json")):
        SpecParser.load(str(path))


def test_result_rows():
    result = ExperimentResult(
        "scaling", "checkerboard", 2, 8, 0.0, statistics={"var_gamma": 0.5}, flags={"holds": True}
    )
    assert list(result.rows()) == [
        ("scaling", "checkerboard", 2, 8, 0.0, "var_gamma", 0.5),
        ("scaling", "checkerboard", 2, 8, 0.0, "flag_holds", 1),
    ]
    assert result.key() == "scaling/d2/L8/beta0.0"


def test_cell_budget(settings):
    spec = ExperimentSpec(dims_and_sizes=[(2, 16)], model=FieldConfig(m=4))
    check_budget(spec, settings)
    with pytest.raises(PreconditionError):
        check_budget(spec, RunSettings(cell_budget=100))


def test_ensemble_replicas_do_not_depend_on_count(settings):
    small = gamma_ensemble(small_checkerboard(replicas=5), settings, 1, 8, 0, 0.0)
    large = gamma_ensemble(small_checkerboard(replicas=8), settings, 1, 8, 0, 0.0)
    assert np.array_equal(small.gammas, large.gammas[:5])
    assert small.seeds == large.seeds[:5]


def test_scaling_preconditions(settings):
    with pytest.raises(PreconditionError):
        run_scaling(small_checkerboard(dims_and_sizes=[(1, 4), (1, 8)]), settings)
    with pytest.raises(PreconditionError):
        run_scaling(small_checkerboard(replicas=1), settings)


def test_scaling_skips_fit_for_deterministic_model(settings):
    model = FieldConfig(model="checkerboard", d=1, L=4, p=1.0, m=2)
    results = run_scaling(small_checkerboard(model=model, replicas=2), settings)
    summary = results[-1]
    assert summary.L is None
    assert summary.flags["fit_skipped"]
    assert all(r.statistics["var_gamma"] == 0.0 for r in results[:-1])


def test_dependent_series_scaling(settings):
    spec = dependent_series(dims_and_sizes=[(1, 4), (1, 8), (1, 16)], replicas=400)
    results = run_scaling(spec, settings)
    for result in results[:-1]:
        closed = 2 * 0.25 / result.L**2
        assert result.statistics["var_inv_gamma_closed"] == pytest.approx(closed)
        assert abs(result.statistics["var_inv_gamma"] - closed) <= 5 * result.statistics["var_inv_gamma_se"]
    summary = results[-1]
    assert not summary.flags["fit_skipped"]
    assert -2.5 <= summary.statistics["inv_gamma_slope"] <= -1.5


def test_counterexample_law():
    atoms, weights = counterexample_law(0.5, 16)
    assert weights.sum() == pytest.approx(1.0)
    assert atoms[1] == pytest.approx(0.5)
    for L in (16, 64, 256):
        assert exact_standardized_dw(*counterexample_law(0.5, L)) >= 0.1
    assert exact_standardized_dw(*counterexample_law(0.0, 16)) is None


def test_counterexample_campaign(settings):
    results = run_counterexample(dependent_series(), settings)
    assert [r.L for r in results] == [8, 16]
    for result in results:
        assert result.flags["away_from_normal"]
        assert result.statistics["dw"] >= 0.1


def test_counterexample_needs_dependent_series(settings):
    with pytest.raises(PreconditionError):
        run_counterexample(small_checkerboard(replicas=200), settings)


def test_normality_needs_enough_replicas(settings):
    with pytest.raises(PreconditionError):
        run_normality(dependent_series(replicas=99), settings)


def test_normality_campaign(settings):
    spec = small_checkerboard(replicas=100, dims_and_sizes=[(1, 4), (1, 16)], mc=McParams(bootstrap=10))
    results = run_normality(spec, settings)
    for result in results[:-1]:
        assert 0 <= result.statistics["dw"] < 1
        assert 0 <= result.statistics["ks_pvalue_vs_control"] <= 1
    assert "dw_decreasing" in results[-1].flags


def test_efron_stein_campaign(settings, tmp_path):
    spec = small_checkerboard(dims_and_sizes=[(1, 4)], replicas=3)
    with RecordWriter(tmp_path / "records.jsonl") as writer:
        results = run_efron_stein(spec, settings, writer)
    assert len(results) == 1
    assert results[0].statistics["n_sites"] == 4.0
    assert len(read_records(tmp_path / "records.jsonl")) == 12


def test_bound_audit_campaign(settings, tmp_path):
    spec = ExperimentSpec(
        model=FieldConfig(model="checkerboard", d=2, L=2, law="uniform", m=2),
        dims_and_sizes=[(2, 2)],
        beta=0.0,
        replicas=2,
        audit_pairs=2,
    )
    with RecordWriter(tmp_path / "records.jsonl") as writer:
        results = run_bound_audit(spec, settings, writer)
        assert writer.count == 2 * (4 + 2)
    result = results[0]
    assert result.flags["bounds_hold"]
    assert result.statistics["max_identity_mismatch"] <= 1e-6
    assert result.statistics["max_deljg_ratio"] <= 1.0


def test_normal_bound_runs_report_subsampling(settings):
    mc = McParams(outer_replicas=10, inner_samples=2, sigma_replicas=100, bootstrap=0, subsample_j=True)
    spec = small_checkerboard(replicas=100, dims_and_sizes=[(1, 4), (1, 8)], normal_bound=True, mc=mc)
    summary = run_normality(spec, settings)[-1]
    assert summary.flags["smallest_L_subsampled"]
    assert "smallest_L_bound_holds" in summary.flags

    audit = ExperimentSpec(
        model=FieldConfig(model="checkerboard", d=2, L=2, law="uniform", m=2),
        dims_and_sizes=[(2, 2)],
        beta=0.0,
        replicas=1,
        audit_pairs=1,
        normal_bound=True,
        mc=mc,
    )
    result = run_bound_audit(audit, settings)[0]
    assert result.flags["subsampled"]
    assert "normal_bound_holds" in result.flags


@pytest.mark.slow
def test_second_differences_decay_with_distance(settings):
    spec = ExperimentSpec(
        model=FieldConfig(model="checkerboard", d=2, L=4, law="uniform", m=2),
        dims_and_sizes=[(2, 4)],
        beta=0.0,
        replicas=8,
        audit_pairs=16,
    )
    result = run_bound_audit(spec, settings)[0]
    assert result.statistics["median_delta2_bin0"] > result.statistics["median_delta2_bin1"]
    assert result.flags["delta2_decreasing"]


def test_greens_campaign_d2(settings, tmp_path):
    spec = ExperimentSpec(
        model=FieldConfig(model="checkerboard", d=2, L=6, m=2),
        dims_and_sizes=[(2, 6)],
        beta=0.0,
        green_fields=1,
        symmetry_pairs=4,
    )
    result = run_greens(spec, settings, tmp_path)[0]
    assert result.statistics["symmetry_pairs_checked"] == 4.0
    assert result.statistics["max_symmetry_error"] <= 1e-6
    assert result.statistics["max_abs_mean"] <= 1e-9
    assert result.statistics["max_annulus_energy"] > 0
    assert result.flags["wk_bounds_hold"]


def test_greens_campaign_d3(settings, tmp_path):
    spec = ExperimentSpec(
        model=FieldConfig(model="checkerboard", d=3, L=2, m=2),
        dims_and_sizes=[(3, 2)],
        green_fields=2,
    )
    results = run_greens(spec, settings, tmp_path)
    assert [r.beta for r in results] == [0.0, 0.25]
    assert (tmp_path / "decay_d3_L2_beta0_field1.csv").exists()
    assert (tmp_path / "decay_d3_L2_beta1_field0.csv").exists()
    assert "dyadic_monotone" in results[0].flags
    assert results[0].statistics["symmetry_pairs_checked"] == 2 * 10.0
    assert results[0].statistics["max_symmetry_error"] <= 1e-6


def test_empty_results_give_header_only_csv(tmp_path):
    csv_path, manifest_path = emit_plot_data([], tmp_path, ExperimentSpec())
    assert csv_path.read_text() == ",".join(COLUMNS) + "\n"
    manifest = json.loads(manifest_path.read_text())
    assert manifest["spec_hash"] == ExperimentSpec().spec_hash()
    assert manifest["seeds"] == {}


def test_reruns_are_identical(settings, tmp_path):
    spec = small_checkerboard()
    first = emit_plot_data(run_scaling(spec, settings), tmp_path / "a", spec)
    second = emit_plot_data(run_scaling(spec, settings), tmp_path / "b", spec)
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_results_do_not_depend_on_workers(settings, tmp_path):
    serial = emit_plot_data(run_scaling(small_checkerboard(workers=1), settings), tmp_path / "a", ExperimentSpec())
    threaded = emit_plot_data(run_scaling(small_checkerboard(workers=3), settings), tmp_path / "b", ExperimentSpec())
    assert serial[0].read_bytes() == threaded[0].read_bytes()


def test_app_runs_campaign_list(tmp_path):
    spec = dependent_series(campaigns=["counterexample", "efron_stein"], replicas=100, output_dir=str(tmp_path))
    results = CampaignApp().run(spec)
    assert {r.campaign for r in results} == {"counterexample", "efron_stein"}
    assert (tmp_path / "results.csv").exists()
    assert (tmp_path / "records.jsonl").exists()


def test_settings_round_trip():
    manager = SettingsManager()
    manager.run.workers = 4
    manager.save()
    loaded = SettingsManager()
    loaded.load()
    assert loaded.run.workers == 4
    assert loaded.run.cell_budget == RunSettings().cell_budget


def test_corrupt_settings_fall_back_to_defaults():
    manager = SettingsManager()
    manager.save()
    with open(manager.get_config_path(), "w") as f:
        f.write("{oops")
    loaded = SettingsManager()
    loaded.load()
    assert loaded.run == RunSettings()


@pytest.fixture
def series_config(tmp_path):
    path = tmp_path / "series.json"
    spec = dependent_series(dims_and_sizes=[(1, 8)], replicas=100)
    path.write_text(json.dumps(spec.to_dict()))
    return str(path)


def test_main_runs_counterexample(series_config, tmp_path):
    out = tmp_path / "out"
    assert main(["counterexample", "--config", series_config, "--out", str(out), "--seed", "5"]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 5
    assert manifest["spec"]["campaigns"] == ["counterexample"]


def test_main_refuses_too_few_replicas(series_config, tmp_path):
    argv = ["normality", "--config", series_config, "--out", str(tmp_path / "out"), "--replicas", "1"]
    assert main(argv) == EXIT_REFUSED


def test_main_refuses_invalid_documents(tmp_path):
    argv = ["scaling", "--out", str(tmp_path / "out"), "--model.model", "honeycomb"]
    assert main(argv) == EXIT_REFUSED


@pytest.mark.parametrize(
    "changes",
    [{"workers": 0}, {"log_level": "LOUD"}, {"failure_budget": 1.5}, {"cell_budget": "lots"}],
)
def test_run_settings_are_validated(changes):
    with pytest.raises(ConfigError):
        RunSettings(**changes)


def _write_settings(values):
    path = Path(SettingsManager().get_config_path())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"run": values}))


def test_invalid_settings_fall_back_per_key():
    _write_settings({"log_level": "LOUD", "workers": 0, "cell_budget": 500, "colour": "red"})
    manager = SettingsManager()
    manager.load()
    assert manager.run == RunSettings(cell_budget=500)


def test_main_survives_invalid_settings(series_config, tmp_path):
    _write_settings({"log_level": "LOUD", "workers": 0})
    assert main(["counterexample", "--config", series_config, "--out", str(tmp_path / "out")]) == EXIT_OK


def test_main_refuses_zero_workers(series_config, tmp_path):
    argv = ["counterexample", "--config", series_config, "--out", str(tmp_path / "out"), "--workers", "0"]
    assert main(argv) == EXIT_REFUSED
