"""Simulation checks that the two-stage estimator behaves as it should.

Used by the ``validate`` command and by the acceptance tests.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from .synth import (
    BiasRow,
    SynthConfig,
    acceptance_seeds,
    bias_experiment,
    format_bias_table,
    generate,
)
from .tsls import fit_two_stage

TWO_STAGE_MAX_BIAS = 0.05
OLS_MIN_BIAS = 0.10
NOISELESS_RTOL = 1e-8
VALIDATION_RHO = 0.8
SAMPLE_SIZES = (500, 2000, 10000)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationResult:
    rows: tuple[BiasRow, ...]
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def report(self) -> str:
        lines = [format_bias_table(self.rows)]
        for c in self.checks:
            lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}\n")
        lines.append(f"verdict={'PASS' if self.passed else 'FAIL'}\n")
        return "".join(lines)


def _row(rows: Sequence[BiasRow], estimator: str, n: int) -> BiasRow:
    return next(r for r in rows if r.estimator == estimator and r.n == n)


def max_relative_error(estimates: Sequence[float], truth: Sequence[float]) -> float:
    est, tru = np.asarray(estimates, dtype=float), np.asarray(truth, dtype=float)
    return float(np.max(np.abs(est - tru) / np.maximum(np.abs(tru), 1e-300)))


def noiseless_recovery(n: int = 10000, config: SynthConfig | None = None) -> tuple[float, float]:
    """Largest relative coefficient error of each stage on a noise-free panel."""
    cfg = replace(config or SynthConfig(), n_agencies=n, n_years=1, sigma_supply=0.0,
                  sigma_demand=0.0)
    records, truth = generate(cfg)
    result = fit_two_stage(records)
    return (
        max_relative_error(result.supply_fit.params, truth.supply_coefficients),
        max_relative_error(result.demand_fit.params, truth.demand_coefficients),
    )


def run_validation(
    seeds: Sequence[int] | None = None,
    replications: int = 200,
    sample_sizes: Sequence[int] = SAMPLE_SIZES,
    rho: float = VALIDATION_RHO,
    config: SynthConfig | None = None,
) -> ValidationResult:
    """Bias experiment under simultaneity plus a noiseless recovery check.

    ``seeds`` defaults to the shipped acceptance seed list.
    """
    cfg = replace(config or SynthConfig(), rho=rho)
    if seeds is None:
        seeds = acceptance_seeds()
    rows = tuple(bias_experiment(cfg, replications=replications, sample_sizes=sample_sizes,
                                 seeds=seeds))
    sizes = sorted(set(sample_sizes))
    largest = sizes[-1]
    two, ols = _row(rows, "two-stage", largest), _row(rows, "ols-direct", largest)
    checks = [
        Check(
            f"two_stage_bias_n{largest}",
            abs(two.mean_bias) < TWO_STAGE_MAX_BIAS,
            f"|mean bias| {abs(two.mean_bias):.6f} < {TWO_STAGE_MAX_BIAS}",
        ),
        Check(
            f"ols_bias_n{largest}",
            abs(ols.mean_bias) > OLS_MIN_BIAS,
            f"|mean bias| {abs(ols.mean_bias):.6f} > {OLS_MIN_BIAS}",
        ),
    ]
    for n in sizes:
        t, o = _row(rows, "two-stage", n), _row(rows, "ols-direct", n)
        checks.append(
            Check(
                f"two_stage_beats_ols_n{n}",
                abs(t.mean_bias) < abs(o.mean_bias),
                f"{abs(t.mean_bias):.6f} < {abs(o.mean_bias):.6f}",
            )
        )
    medians = [_row(rows, "two-stage", n).median_abs_error for n in sizes]
    checks.append(
        Check(
            "two_stage_median_error_nonincreasing",
            all(a >= b for a, b in zip(medians, medians[1:])),
            " >= ".join(f"{m:.6f}" for m in medians),
        )
    )
    s_err, d_err = noiseless_recovery(config=cfg)
    checks.append(
        Check(
            "noiseless_recovery",
            max(s_err, d_err) <= NOISELESS_RTOL,
            f"supply {s_err:.3e}, demand {d_err:.3e} <= {NOISELESS_RTOL:g}",
        )
    )
    return ValidationResult(rows, tuple(checks))
