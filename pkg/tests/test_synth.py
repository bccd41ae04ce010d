import io
import math
from dataclasses import replace

import numpy as np
import pytest

from transit2sls.errors import ConfigError
from transit2sls.ingest import build_model_frame, load_dataset, parse_dataset, write_dataset
from transit2sls.synth import (
    CALIBRATED,
    GroundTruth,
    SynthConfig,
    acceptance_seeds,
    bias_experiment,
    calibrated_dataset_path,
    demand_slope_draws,
    format_bias_table,
    generate,
    replication_rng,
    simulate,
    to_records,
)
from transit2sls.tsls import fit_direct_ols, fit_two_stage


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(rho=1.5),
        dict(rho=-1.01),
        dict(sigma_supply=-0.1),
        dict(n_agencies=0),
        dict(n_years=0),
        dict(log_sad=(1.0, -1.0)),
    ],
)
def test_config_bounds(kwargs):
    with pytest.raises(ConfigError):
        SynthConfig(**kwargs)


def test_same_seed_same_bytes():
    cfg = SynthConfig(n_agencies=30, n_years=3, seed=4)
    a, b = io.StringIO(), io.StringIO()
    write_dataset(generate(cfg)[0], a)
    write_dataset(generate(cfg)[0], b)
    assert a.getvalue() == b.getvalue()
    c = io.StringIO()
    write_dataset(generate(replace(cfg, seed=5))[0], c)
    assert c.getvalue() != a.getvalue()


def test_noiseless_equations_hold():
    cfg = SynthConfig(n_agencies=50, n_years=2, sigma_supply=0, sigma_demand=0)
    s = simulate(cfg)
    lhs = s.log_vrh
    rhs = 4.06 + 0.22 * s.log_acpt + 0.12 * s.log_sad + 0.14 * s.log_voms
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    np.testing.assert_allclose(s.log_tupt, 5.38 + 0.98 * lhs - 0.13 * s.log_afpt, atol=1e-12)


def test_records_reproduce_draws():
    cfg = SynthConfig(n_agencies=40, n_years=2, seed=2)
    s = simulate(cfg)
    records, _ = generate(cfg)
    np.testing.assert_allclose(np.log([r.acpt for r in records]), s.log_acpt, atol=1e-12)
    np.testing.assert_allclose(np.log([r.sad for r in records]), s.log_sad, atol=1e-12)
    np.testing.assert_allclose(np.log([r.afpt for r in records]), s.log_afpt, atol=1e-12)
    np.testing.assert_allclose(np.log([r.vrh for r in records]), s.log_vrh, atol=1e-12)
    assert {r.year for r in records} == {2002, 2003}


@pytest.mark.parametrize("rho", [-0.6, 0.0, 0.8])
def test_disturbance_correlation(rho):
    cfg = SynthConfig(n_agencies=20000, n_years=1, rho=rho, seed=3)
    s = simulate(cfg)
    r = np.corrcoef(s.u_supply, s.u_demand)[0, 1]
    assert abs(r - rho) < 3 / math.sqrt(cfg.n)


def test_generated_data_pass_validation_with_zero_exclusions():
    cfg = SynthConfig(n_agencies=100, n_years=17, seed=8)
    buf = io.StringIO()
    write_dataset(generate(cfg)[0], buf)
    buf.seek(0)
    records, report = parse_dataset(buf)
    assert len(records) == cfg.n
    assert report.total_dropped == 0 and not report.missing_cells
    buf.seek(0)
    derived, _ = load_dataset(buf)
    _, frame_report = build_model_frame(derived, "tupt", ["vrh", "acpt", "sad", "voms", "afpt"])
    assert frame_report.total_dropped == 0


def test_truth_sidecar_round_trip():
    truth = GroundTruth.from_config(CALIBRATED)
    assert GroundTruth.from_text(truth.to_text()) == truth
    with pytest.raises(ConfigError):
        GroundTruth.from_text("rho=0.1\n")


def test_ground_truth_sidecar_recovery():
    records, truth = generate(SynthConfig(n_agencies=300, n_years=1, sigma_supply=0,
                                          sigma_demand=0, seed=12))
    result = fit_two_stage(records)
    np.testing.assert_allclose(result.supply_fit.params, truth.supply_coefficients, rtol=1e-8)
    np.testing.assert_allclose(result.demand_fit.params, truth.demand_coefficients, rtol=1e-8)


def test_fast_path_matches_record_pipeline():
    cfg = SynthConfig(rho=0.8)
    seed, n = acceptance_seeds()[0], 800
    draws = demand_slope_draws(cfg, n, [seed])
    s = simulate(replace(cfg, n_agencies=n, n_years=1), replication_rng(seed, n))
    records = to_records(s)
    assert draws["two-stage"][0] == pytest.approx(fit_two_stage(records).demand_fit["evrh"].estimate,
                                                  rel=1e-10)
    assert draws["ols-direct"][0] == pytest.approx(fit_direct_ols(records)["vrh"].estimate,
                                                   rel=1e-10)


def test_bias_experiment_deterministic():
    cfg = SynthConfig(rho=0.8, seed=1)
    a = bias_experiment(cfg, replications=1, sample_sizes=(300,))
    b = bias_experiment(cfg, replications=1, sample_sizes=(300,))
    assert format_bias_table(a) == format_bias_table(b)
    assert [r.estimator for r in a] == ["ols-direct", "two-stage"]


def test_bias_experiment_order_independent():
    cfg = SynthConfig(rho=0.8)
    seeds = acceptance_seeds()[:6]
    fwd = demand_slope_draws(cfg, 300, seeds)
    rev = demand_slope_draws(cfg, 300, seeds[::-1])
    np.testing.assert_array_equal(fwd["two-stage"], rev["two-stage"][::-1])


def test_exogenous_both_unbiased():
    cfg = SynthConfig(rho=0.0)
    rows = bias_experiment(cfg, replications=100, sample_sizes=(2000,),
                           seeds=acceptance_seeds())
    for r in rows:
        assert abs(r.mean_bias) < 3 * r.std / math.sqrt(r.replications)


def test_endogenous_two_stage_less_biased_at_every_n():
    rows = bias_experiment(SynthConfig(rho=0.8), replications=60,
                           sample_sizes=(500, 2000, 10000), seeds=acceptance_seeds())
    for n in (500, 2000, 10000):
        two = next(r for r in rows if r.n == n and r.estimator == "two-stage")
        ols = next(r for r in rows if r.n == n and r.estimator == "ols-direct")
        assert abs(two.mean_bias) < abs(ols.mean_bias)
    med = [r.median_abs_error for r in rows if r.estimator == "two-stage"]
    assert med[0] >= med[1] >= med[2]


def test_bias_experiment_errors():
    with pytest.raises(ConfigError):
        bias_experiment(SynthConfig(), replications=0)
    with pytest.raises(ConfigError):
        bias_experiment(SynthConfig(), estimators=("lasso",))
    with pytest.raises(ConfigError):
        bias_experiment(SynthConfig(), replications=3, seeds=[1, 2])


def test_shipped_files():
    assert len(acceptance_seeds()) == 200
    assert len(set(acceptance_seeds())) == 200
    path = calibrated_dataset_path()
    truth_text = path.with_name("calibrated_synthetic.truth").read_text()
    assert GroundTruth.from_text(truth_text) == GroundTruth.from_config(CALIBRATED)
    with path.open() as fh:
        shipped = fh.read()
    buf = io.StringIO()
    write_dataset(generate(CALIBRATED)[0], buf)
    assert buf.getvalue() == shipped
