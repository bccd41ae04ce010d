from dataclasses import replace

import numpy as np
import pytest

from transit2sls.errors import CollinearityError, SchemaError, ShapeError, StageError
from transit2sls.ingest import derive_variables
from transit2sls.regress import predict
from transit2sls.synth import SynthConfig, generate
from transit2sls.tsls import (
    DEMAND_SPEC,
    SUPPLY_SPEC,
    StageSpec,
    fit_demand,
    fit_direct_ols,
    fit_supply,
    fit_two_stage,
    supply_column,
)

NOISELESS = SynthConfig(n_agencies=400, n_years=1, sigma_supply=0.0, sigma_demand=0.0, seed=5)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b) / np.abs(b))


@pytest.fixture(scope="module")
def noisy():
    records, truth = generate(SynthConfig(n_agencies=300, n_years=17, rho=0.5, seed=1))
    return records, truth


def test_supply_noiseless_recovery():
    records, truth = generate(NOISELESS)
    fit = fit_supply(records)
    assert fit.names == ("Intercept", "acpt", "sad", "voms")
    assert rel_err(fit.params, (4.06, 0.22, 0.12, 0.14)) < 1e-8


def test_demand_noiseless_recovery():
    records, _ = generate(NOISELESS)
    evrh = supply_column(records, fit_supply(records))
    fit = fit_demand(records, evrh)
    assert fit.names == ("Intercept", "evrh", "afpt")
    assert rel_err(fit.params, (5.38, 0.98, -0.13)) < 1e-8


@pytest.mark.parametrize(
    "coefs",
    [
        dict(supply_intercept=1.0, beta_acpt=-0.5, beta_sad=0.3, beta_voms=0.9,
             demand_intercept=-2.0, beta_supply=0.4, beta_afpt=-0.7),
        dict(supply_intercept=7.0, beta_acpt=0.05, beta_sad=0.6, beta_voms=0.2,
             demand_intercept=3.0, beta_supply=1.3, beta_afpt=0.2),
    ],
)
def test_noiseless_recovery_any_coefficients(coefs):
    records, truth = generate(replace(NOISELESS, **coefs))
    result = fit_two_stage(records)
    assert rel_err(result.supply_fit.params, truth.supply_coefficients) < 1e-8
    assert rel_err(result.demand_fit.params, truth.demand_coefficients) < 1e-8


def test_duplicate_regressor_column_is_collinear():
    records, _ = generate(replace(NOISELESS, sigma_supply=0.3))
    # make cost per trip identical to service area density on every row
    records = [
        derive_variables(replace(r, total_operating_cost=r.sad * r.tupt)) for r in records
    ]
    with pytest.raises(CollinearityError) as info:
        fit_supply(records)
    assert info.value.column == "sad"


def test_signs_on_noisy_panel(noisy):
    records, _ = noisy
    result = fit_two_stage(records)
    s, d = result.supply_fit, result.demand_fit
    assert s["acpt"].estimate > 0 and s["sad"].estimate > 0 and s["voms"].estimate > 0
    assert d["evrh"].estimate > 0 and d["afpt"].estimate < 0


def test_evrh_wrong_length(noisy):
    records, _ = noisy
    with pytest.raises(ShapeError):
        fit_demand(records, np.zeros(len(records) - 1))


def test_stage_linkage_exact(noisy):
    records, _ = noisy
    result = fit_two_stage(records)
    rows = list(result.demand_rows)
    assert set(rows) <= set(result.supply_rows)
    full = np.full(len(records), np.nan)
    full[list(result.supply_rows)] = predict(result.supply_fit, result.supply_fit.frame)
    np.testing.assert_array_equal(result.evrh, full[rows])
    np.testing.assert_array_equal(result.demand_fit.frame.column("evrh"), full[rows])
    assert len(result.evrh) == result.demand_fit.diagnostics.n


def test_supply_exclusions_carry_into_demand(noisy):
    records, _ = noisy
    records = list(records)
    records[0] = derive_variables(replace(records[0], vrh=0.0))
    records[1] = derive_variables(replace(records[1], total_fares=None))
    result = fit_two_stage(records)
    assert 0 not in result.supply_rows and 0 not in result.demand_rows
    assert 1 in result.supply_rows and 1 not in result.demand_rows
    assert result.supply_exclusions.dropped == {"nonpositive_under_log": 1}
    assert result.demand_exclusions.dropped == {"missing_evrh": 1, "missing_value": 1}
    assert result.demand_exclusions.balanced()


def test_se_modes_share_point_estimates(noisy):
    records, _ = noisy
    naive = fit_two_stage(records, se_mode="naive")
    corrected = fit_two_stage(records, se_mode="corrected")
    np.testing.assert_array_equal(naive.demand_fit.params, corrected.demand_fit.params)
    np.testing.assert_array_equal(naive.supply_fit.params, corrected.supply_fit.params)
    assert naive.demand_fit.diagnostics.rmse == corrected.demand_fit.diagnostics.rmse
    se_n = [c.standard_error for c in naive.demand_fit.coefficients]
    se_c = [c.standard_error for c in corrected.demand_fit.coefficients]
    assert not np.allclose(se_n, se_c)


def test_corrected_se_uses_observed_supply(noisy):
    records, _ = noisy
    result = fit_two_stage(records, se_mode="corrected")
    d = result.demand_fit
    obs = np.log([records[i].vrh for i in d.frame.rows])
    x = np.column_stack([np.ones(d.frame.n), obs, d.frame.column("afpt")])
    resid = d.frame.response - x @ d.params
    s2 = resid @ resid / (d.frame.n - 3)
    xhat = d.frame.design()
    se = np.sqrt(s2 * np.diag(np.linalg.inv(xhat.T @ xhat)))
    np.testing.assert_allclose([c.standard_error for c in d.coefficients], se, rtol=1e-8)


def test_stage_error_names_stage():
    records, _ = generate(NOISELESS)
    bad = StageSpec("tupt", ("evrh", "voms", "afpt"))
    records = [derive_variables(replace(r, voms=None)) for r in records]
    with pytest.raises(StageError) as info:
        fit_two_stage(records, demand_spec=bad)
    assert info.value.stage == "supply"


def test_unknown_se_mode(noisy):
    with pytest.raises(ValueError):
        fit_two_stage(noisy[0], se_mode="robust")


def test_optional_trip_length_regressor(noisy):
    records, _ = noisy
    spec = StageSpec("tupt", ("evrh", "afpt", "avg_trip_length"))
    result = fit_two_stage(records, demand_spec=spec)
    assert result.demand_fit.names[-1] == "avg_trip_length"


def test_spec_validation():
    with pytest.raises(SchemaError):
        StageSpec("vrh", ("vrh", "sad"))
    with pytest.raises(SchemaError):
        StageSpec("vrh", ("bogus",))
    with pytest.raises(SchemaError):
        fit_supply([], StageSpec("vrh", ("evrh",)))


def test_defaults():
    assert SUPPLY_SPEC.regressor_names == ("acpt", "sad", "voms")
    assert DEMAND_SPEC.regressor_names == ("evrh", "afpt")


def test_direct_ols_uses_observed_supply(noisy):
    records, _ = noisy
    fit = fit_direct_ols(records)
    assert fit.names == ("Intercept", "vrh", "afpt")


def test_no_endogeneity_ols_and_2sls_agree():
    records, _ = generate(SynthConfig(n_agencies=20000, n_years=1, rho=0.0, seed=9))
    two = fit_two_stage(records).demand_fit
    ols = fit_direct_ols(records)
    diff = abs(two["evrh"].estimate - ols["vrh"].estimate)
    assert diff < 4 * two["evrh"].standard_error
