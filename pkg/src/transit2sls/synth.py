"""Synthetic agency-year panels with known supply and demand coefficients.

Everything is generated in log space:

    log VRH  = a_s + b_acpt*log ACPT + b_sad*log SAD + b_voms*log VOMS + u_s
    log TUPT = a_d + b_vrh*log VRH + b_afpt*log AFPT + u_d

with ``(u_s, u_d)`` jointly normal, standard deviations ``sigma_supply`` and
``sigma_demand`` and correlation ``rho``.  Demand uses the realized supply,
so ``rho != 0`` makes observed VRH endogenous in the demand equation.  Raw
fields (costs, fares, population, area, miles) are then back-solved so that
the derived per-trip and density variables reproduce the drawn values.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError
from .ingest import AgencyYearRecord, DerivedRecord, derive_variables
from .regress import solve_least_squares

ESTIMATORS = ("ols-direct", "two-stage")


@dataclass(frozen=True)
class SynthConfig:
    """Ground truth and sampling distributions for one synthetic panel.

    Coefficient defaults are the published supply and demand estimates.
    Regressor distributions are normal in log space, ``(mean, sd)``.
    """

    n_agencies: int = 606
    n_years: int = 17
    start_year: int = 2002

    supply_intercept: float = 4.06
    beta_acpt: float = 0.22
    beta_sad: float = 0.12
    beta_voms: float = 0.14
    demand_intercept: float = 5.38
    beta_supply: float = 0.98
    beta_afpt: float = -0.13

    sigma_supply: float = 1.0
    sigma_demand: float = 1.0
    rho: float = 0.0

    log_acpt: tuple[float, float] = (1.6, 0.6)
    log_sad: tuple[float, float] = (7.3, 1.0)
    log_voms: tuple[float, float] = (3.5, 1.5)
    voms_trend: float = 0.02
    log_afpt: tuple[float, float] = (0.0, 0.5)
    log_area: tuple[float, float] = (5.0, 1.2)
    log_trip_length: tuple[float, float] = (1.6, 0.3)
    log_speed: tuple[float, float] = (2.55, 0.15)

    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_agencies < 1 or self.n_years < 1:
            raise ConfigError("n_agencies and n_years must both be at least 1")
        if not (self.sigma_supply >= 0 and self.sigma_demand >= 0):
            raise ConfigError("noise standard deviations must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ConfigError(f"rho must lie in [-1, 1], got {self.rho}")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                if len(v) != 2 or not v[1] >= 0 or not all(map(math.isfinite, v)):
                    raise ConfigError(f"{f.name} must be (mean, sd) with sd >= 0")
            elif isinstance(v, float) and not math.isfinite(v):
                raise ConfigError(f"{f.name} must be finite")

    @property
    def n(self) -> int:
        return self.n_agencies * self.n_years

    @property
    def supply_coefficients(self) -> tuple[float, float, float, float]:
        return (self.supply_intercept, self.beta_acpt, self.beta_sad, self.beta_voms)

    @property
    def demand_coefficients(self) -> tuple[float, float, float]:
        return (self.demand_intercept, self.beta_supply, self.beta_afpt)


# Shipped calibrated panel: full 606 x 17 panel, moderate simultaneity.
CALIBRATED = SynthConfig(rho=0.5, seed=20191203)


@dataclass(frozen=True)
class SyntheticSample:
    """Log-space draws behind one generated panel, one entry per row."""

    agency: NDArray[np.int64]
    year: NDArray[np.int64]
    log_acpt: NDArray[np.float64]
    log_sad: NDArray[np.float64]
    log_voms: NDArray[np.float64]
    log_afpt: NDArray[np.float64]
    u_supply: NDArray[np.float64]
    u_demand: NDArray[np.float64]
    log_vrh: NDArray[np.float64]
    log_tupt: NDArray[np.float64]
    log_area: NDArray[np.float64]
    log_trip_length: NDArray[np.float64]
    log_speed: NDArray[np.float64]


def simulate(config: SynthConfig, rng: np.random.Generator | None = None) -> SyntheticSample:
    """Draw the log-space variables and disturbances for ``config``."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.n
    agency = np.repeat(np.arange(config.n_agencies), config.n_years)
    t = np.tile(np.arange(config.n_years), config.n_agencies)

    def draw(ms: tuple[float, float]) -> NDArray[np.float64]:
        return ms[0] + ms[1] * rng.standard_normal(n)

    log_acpt = draw(config.log_acpt)
    log_sad = draw(config.log_sad)
    log_voms = draw(config.log_voms) + config.voms_trend * t
    log_afpt = draw(config.log_afpt)
    z = rng.standard_normal((2, n))
    u_s = config.sigma_supply * z[0]
    u_d = config.sigma_demand * (config.rho * z[0] + math.sqrt(1.0 - config.rho**2) * z[1])
    log_area = draw(config.log_area)
    log_trip = draw(config.log_trip_length)
    log_speed = draw(config.log_speed)

    log_vrh = (
        config.supply_intercept
        + config.beta_acpt * log_acpt
        + config.beta_sad * log_sad
        + config.beta_voms * log_voms
        + u_s
    )
    log_tupt = (
        config.demand_intercept + config.beta_supply * log_vrh + config.beta_afpt * log_afpt + u_d
    )
    return SyntheticSample(
        agency=agency,
        year=config.start_year + t,
        log_acpt=log_acpt,
        log_sad=log_sad,
        log_voms=log_voms,
        log_afpt=log_afpt,
        u_supply=u_s,
        u_demand=u_d,
        log_vrh=log_vrh,
        log_tupt=log_tupt,
        log_area=log_area,
        log_trip_length=log_trip,
        log_speed=log_speed,
    )


def to_records(sample: SyntheticSample) -> list[DerivedRecord]:
    """Back-solve raw NTD-style fields and derive the model variables."""
    vrh = np.exp(sample.log_vrh)
    tupt = np.exp(sample.log_tupt)
    area = np.exp(sample.log_area)
    cols = {
        "vrh": vrh,
        "tupt": tupt,
        "voms": np.exp(sample.log_voms),
        "passenger_miles": tupt * np.exp(sample.log_trip_length),
        "vrm": vrh * np.exp(sample.log_speed),
        "avg_trip_length": np.exp(sample.log_trip_length),
        "service_area_population": np.exp(sample.log_sad) * area,
        "service_area_sq_miles": area,
        "total_operating_cost": np.exp(sample.log_acpt) * tupt,
        "total_fares": np.exp(sample.log_afpt) * tupt,
    }
    names = list(cols)
    matrix = np.column_stack([cols[k] for k in names]).tolist()
    width = len(str(int(sample.agency.max()) if sample.agency.size else 0))
    out = []
    for a, y, row in zip(sample.agency.tolist(), sample.year.tolist(), matrix):
        rec = AgencyYearRecord(f"A{a:0{width}d}", int(y), **dict(zip(names, row)))
        out.append(derive_variables(rec))
    return out


@dataclass(frozen=True)
class GroundTruth:
    """The coefficients and noise settings a panel was generated from."""

    supply_intercept: float
    beta_acpt: float
    beta_sad: float
    beta_voms: float
    demand_intercept: float
    beta_supply: float
    beta_afpt: float
    sigma_supply: float
    sigma_demand: float
    rho: float
    seed: int
    n_agencies: int
    n_years: int
    start_year: int

    @classmethod
    def from_config(cls, config: SynthConfig) -> GroundTruth:
        return cls(**{f.name: getattr(config, f.name) for f in fields(cls)})

    @property
    def supply_coefficients(self) -> tuple[float, ...]:
        return (self.supply_intercept, self.beta_acpt, self.beta_sad, self.beta_voms)

    @property
    def demand_coefficients(self) -> tuple[float, ...]:
        return (self.demand_intercept, self.beta_supply, self.beta_afpt)

    def to_text(self) -> str:
        return "".join(f"{k}={v!r}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> GroundTruth:
        raw = {}
        for line in text.splitlines():
            if line.strip():
                k, _, v = line.partition("=")
                raw[k.strip()] = v.strip()
        kinds = {f.name: f.type for f in fields(cls)}
        missing = set(kinds) - set(raw)
        if missing:
            raise ConfigError(f"ground-truth file lacks {sorted(missing)}")
        return cls(**{k: (int(raw[k]) if kinds[k] == "int" else float(raw[k])) for k in kinds})


def generate(config: SynthConfig) -> tuple[list[DerivedRecord], GroundTruth]:
    """Synthetic records for ``config`` plus the truth they were drawn from.

    The same config (seed included) always yields identical records.
    """
    return to_records(simulate(config)), GroundTruth.from_config(config)


# ------------------------------------------------------------ bias experiment


@dataclass(frozen=True)
class BiasRow:
    estimator: str
    n: int
    replications: int
    mean_bias: float
    std: float
    median_abs_error: float


def _slopes(sample: SyntheticSample) -> dict[str, float]:
    ones = np.ones(sample.log_vrh.shape[0])
    xs = np.column_stack([ones, sample.log_acpt, sample.log_sad, sample.log_voms])
    evrh = xs @ solve_least_squares(xs, sample.log_vrh)
    two = solve_least_squares(np.column_stack([ones, evrh, sample.log_afpt]), sample.log_tupt)
    ols = solve_least_squares(
        np.column_stack([ones, sample.log_vrh, sample.log_afpt]), sample.log_tupt
    )
    return {"two-stage": float(two[1]), "ols-direct": float(ols[1])}


def replication_rng(seed: int, n: int) -> np.random.Generator:
    """Generator for one replication; depends only on ``(seed, n)``."""
    return np.random.default_rng([int(seed), int(n)])


def replication_seeds(config: SynthConfig, replications: int) -> list[int]:
    state = np.random.SeedSequence(config.seed).generate_state(replications, dtype=np.uint32)
    return [int(s) for s in state]


def demand_slope_draws(
    config: SynthConfig, n: int, seeds: Sequence[int]
) -> dict[str, NDArray[np.float64]]:
    """Demand-slope estimates per estimator, one per seed, at sample size ``n``."""
    cfg = replace(config, n_agencies=n, n_years=1)
    draws: dict[str, list[float]] = {e: [] for e in ESTIMATORS}
    for seed in seeds:
        est = _slopes(simulate(cfg, replication_rng(seed, n)))
        for e in ESTIMATORS:
            draws[e].append(est[e])
    return {e: np.array(v) for e, v in draws.items()}


def bias_experiment(
    config: SynthConfig,
    estimators: Sequence[str] = ESTIMATORS,
    replications: int = 200,
    sample_sizes: Sequence[int] = (500, 2000, 10000),
    seeds: Sequence[int] | None = None,
) -> list[BiasRow]:
    """Bias, spread and median absolute error of the demand supply-slope.

    Each replication draws a fresh cross-section of ``n`` agencies from
    ``config`` using a generator seeded by ``(seed, n)``, so results do not
    depend on evaluation order.  ``seeds`` defaults to seeds derived from
    ``config.seed``.
    """
    if replications < 1:
        raise ConfigError("replications must be at least 1")
    unknown = set(estimators) - set(ESTIMATORS)
    if unknown:
        raise ConfigError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
    if seeds is None:
        seeds = replication_seeds(config, replications)
    elif len(seeds) < replications:
        raise ConfigError(f"{replications} replications but only {len(seeds)} seeds")
    seeds = list(seeds)[:replications]

    rows = []
    for n in sample_sizes:
        if n < 4:
            raise ConfigError("sample sizes must be at least 4")
        draws = demand_slope_draws(config, n, seeds)
        for e in estimators:
            err = draws[e] - config.beta_supply
            rows.append(
                BiasRow(
                    estimator=e,
                    n=int(n),
                    replications=replications,
                    mean_bias=float(err.mean()),
                    std=float(err.std(ddof=1)) if replications > 1 else 0.0,
                    median_abs_error=float(np.median(np.abs(err))),
                )
            )
    return rows


def format_bias_table(rows: Sequence[BiasRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["estimator", "n", "replications", "mean_bias", "std", "median_abs_error"])
    for r in rows:
        w.writerow([r.estimator, r.n, r.replications, repr(r.mean_bias), repr(r.std),
                    repr(r.median_abs_error)])
    return buf.getvalue()


# ---------------------------------------------------------------- shipped data


def acceptance_seeds() -> list[int]:
    """The fixed seed list used for every stochastic acceptance run."""
    text = resources.files("transit2sls").joinpath("data/acceptance_seeds.txt").read_text()
    return [int(line.split("#")[0]) for line in text.splitlines() if line.split("#")[0].strip()]


def calibrated_dataset_path():
    """Path of the shipped calibrated synthetic panel (CSV)."""
    return resources.files("transit2sls").joinpath("data/calibrated_synthetic.csv")
