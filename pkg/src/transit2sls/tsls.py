"""Two-stage estimation of transit supply and demand.

Stage one regresses log vehicle revenue hours on the supply-side variables.
Its fitted values (EVRH, already in log space) then replace observed supply
as a regressor in the demand equation for log unlinked passenger trips.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .errors import SchemaError, ShapeError, StageError, TransitModelError
from .ingest import DerivedRecord, ExclusionReport, build_model_frame, canonical_name
from .regress import FitResult, fit_ols, format_report, predict, rescale_standard_errors

EVRH = "evrh"

DISPLAY_NAMES: dict[str, str] = {
    "vrh": "VRH",
    "tupt": "TUPT",
    "acpt": "ACPT",
    "sad": "SAD",
    "voms": "AVOMS",
    "afpt": "AFPT",
    "evrh": "EVRH",
    "vrm": "VRM",
    "avg_trip_length": "ATL",
    "passenger_miles": "PMT",
}

SE_MODES = ("naive", "corrected")


@dataclass(frozen=True)
class StageSpec:
    """Variables, log flags and inference settings for one equation.

    ``log`` is ``True`` (log every record variable), ``False``, or the
    names to log.  The fitted-supply column ``evrh`` is never logged again.
    """

    response: str
    regressors: tuple[str, ...]
    log: bool | tuple[str, ...] = True
    critical: Mapping[str, float] = field(default_factory=dict)
    critical_mode: str = "fixed"

    def __post_init__(self) -> None:
        object.__setattr__(self, "regressors", tuple(self.regressors))
        if not isinstance(self.log, bool):
            object.__setattr__(self, "log", tuple(self.log))
        resp = self._canon(self.response)
        regs = [self._canon(r) for r in self.regressors]
        if resp in regs:
            raise SchemaError(f"response {self.response!r} is also listed as a regressor")
        if len(set(regs)) != len(regs):
            raise SchemaError(f"duplicate regressors in {self.regressors}")

    @staticmethod
    def _canon(name: str) -> str:
        return EVRH if name.lower() == EVRH else canonical_name(name)

    @property
    def response_name(self) -> str:
        return self._canon(self.response)

    @property
    def regressor_names(self) -> tuple[str, ...]:
        return tuple(self._canon(r) for r in self.regressors)


SUPPLY_SPEC = StageSpec("vrh", ("acpt", "sad", "voms"))
DEMAND_SPEC = StageSpec("tupt", (EVRH, "afpt"))


@dataclass(frozen=True)
class TwoStageResult:
    """Both stage fits plus the linkage between them.

    ``evrh`` is the fitted supply value for each demand-stage row and
    ``demand_rows``/``supply_rows`` index into the input record list.
    """

    supply_fit: FitResult
    demand_fit: FitResult
    evrh: NDArray[np.float64]
    supply_rows: tuple[int, ...]
    demand_rows: tuple[int, ...]
    se_mode: str
    supply_exclusions: ExclusionReport
    demand_exclusions: ExclusionReport

    def report(self) -> str:
        return (
            format_supply_report(self.supply_fit)
            + "\n"
            + format_demand_report(self.demand_fit)
        )


def _fit(
    dataset: Sequence[DerivedRecord],
    spec: StageSpec,
    extra: Mapping[str, NDArray[np.float64]] | None = None,
) -> FitResult:
    frame, report = build_model_frame(
        dataset, spec.response_name, spec.regressor_names, log=spec.log, extra=extra
    )
    fit = fit_ols(frame, critical=spec.critical, critical_mode=spec.critical_mode)
    return replace(fit, exclusions=report)


def fit_supply(dataset: Sequence[DerivedRecord], spec: StageSpec = SUPPLY_SPEC) -> FitResult:
    """OLS of (log) VRH on the supply regressors.

    The returned fit's ``frame.rows`` records which input rows were used and
    ``exclusions`` holds the row-drop report.
    """
    if EVRH in spec.regressor_names or spec.response_name == EVRH:
        raise SchemaError("the supply stage cannot use the fitted-supply column")
    return _fit(dataset, spec)


def fit_demand(
    dataset: Sequence[DerivedRecord],
    evrh: Sequence[float] | NDArray[np.float64],
    spec: StageSpec = DEMAND_SPEC,
) -> FitResult:
    """OLS of (log) TUPT on the fitted supply column and the demand regressors.

    ``evrh`` is aligned with ``dataset``; ``NaN`` marks rows that did not
    make it through the supply stage, which are dropped here under the rule
    ``missing_evrh``.
    """
    col = np.asarray(evrh, dtype=float).reshape(-1)
    if col.shape[0] != len(dataset):
        raise ShapeError(f"evrh has {col.shape[0]} values for {len(dataset)} records")
    extra = {EVRH: col} if EVRH in spec.regressor_names else None
    return _fit(dataset, spec, extra)


def supply_column(dataset: Sequence[DerivedRecord], supply_fit: FitResult) -> NDArray[np.float64]:
    """Fitted supply values aligned with ``dataset``; ``NaN`` outside the supply frame."""
    col = np.full(len(dataset), np.nan)
    col[list(supply_fit.frame.rows)] = predict(supply_fit, supply_fit.frame)
    return col


def fit_two_stage(
    dataset: Sequence[DerivedRecord],
    supply_spec: StageSpec = SUPPLY_SPEC,
    demand_spec: StageSpec = DEMAND_SPEC,
    se_mode: str = "naive",
) -> TwoStageResult:
    """Run both stages.

    ``se_mode="naive"`` keeps the plain second-stage OLS standard errors.
    ``se_mode="corrected"`` recomputes the second-stage residual variance
    with the observed supply variable in place of its fitted value and
    rescales the standard errors; point estimates are the same in both.

    Raises
    ------
    StageError
        Wrapping whatever failed, with ``stage`` set to ``"supply"`` or
        ``"demand"``.
    """
    if se_mode not in SE_MODES:
        raise ValueError(f"se_mode must be one of {SE_MODES}, got {se_mode!r}")
    try:
        supply = fit_supply(dataset, supply_spec)
        evrh_full = supply_column(dataset, supply)
    except TransitModelError as exc:
        raise StageError("supply", exc) from exc
    try:
        demand = fit_demand(dataset, evrh_full, demand_spec)
        if se_mode == "corrected":
            demand = _corrected(demand, supply, dataset)
    except TransitModelError as exc:
        raise StageError("demand", exc) from exc

    rows = demand.frame.rows
    evrh = evrh_full[list(rows)]
    evrh.setflags(write=False)
    return TwoStageResult(
        supply_fit=supply,
        demand_fit=demand,
        evrh=evrh,
        supply_rows=supply.frame.rows,
        demand_rows=rows,
        se_mode=se_mode,
        supply_exclusions=supply.exclusions,
        demand_exclusions=demand.exclusions,
    )


def _corrected(demand: FitResult, supply: FitResult, dataset: Sequence[DerivedRecord]) -> FitResult:
    if EVRH not in demand.frame.regressor_names:
        return demand
    observed = np.full(len(dataset), np.nan)
    observed[list(supply.frame.rows)] = supply.frame.response
    x = demand.frame.design().copy()
    x[:, 1 + demand.frame.regressor_names.index(EVRH)] = observed[list(demand.frame.rows)]
    resid = demand.frame.response - x @ demand.params
    n, k = x.shape
    return rescale_standard_errors(demand, float(resid @ resid) / (n - k))


def fit_direct_ols(
    dataset: Sequence[DerivedRecord],
    demand_spec: StageSpec = DEMAND_SPEC,
    supply_variable: str = "vrh",
) -> FitResult:
    """Single-stage OLS of demand on *observed* supply, ignoring simultaneity."""
    regs = tuple(supply_variable if r == EVRH else r for r in demand_spec.regressor_names)
    log = demand_spec.log
    if not isinstance(log, bool) and EVRH in log:
        log = tuple(supply_variable if r == EVRH else r for r in log)
    critical = {(supply_variable if k == EVRH else k): v for k, v in demand_spec.critical.items()}
    spec = StageSpec(demand_spec.response, regs, log, critical, demand_spec.critical_mode)
    return _fit(dataset, spec)


def format_supply_report(fit: FitResult) -> str:
    return format_report(
        fit, "Parameter Estimates for the Supply Model by Regression Analysis", DISPLAY_NAMES
    )


def format_demand_report(fit: FitResult) -> str:
    return format_report(
        fit, "Parameter Estimates for the Demand Model by Regression Analysis", DISPLAY_NAMES
    )
