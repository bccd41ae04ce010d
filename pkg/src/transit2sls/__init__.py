"""Two-stage least squares estimation of urban transit supply and demand."""

from .descriptive import FIGURE_METRICS, YearlySeries, summary_table, yearly_mean
from .errors import (
    CollinearityError,
    ConfigError,
    DegenerateDataError,
    InsufficientDataError,
    InvalidInferenceError,
    SchemaError,
    ShapeError,
    StageError,
    TransitModelError,
)
from .ingest import (
    AgencyYearRecord,
    DerivedRecord,
    ExclusionReport,
    build_model_frame,
    derive_variables,
    load_dataset,
    parse_dataset,
    write_dataset,
)
from .regress import (
    CoefficientEstimate,
    FitDiagnostics,
    FitResult,
    ModelFrame,
    adjusted_r_squared,
    fit_ols,
    mae,
    predict,
    rmse,
    solve_least_squares,
    t_test,
)
from .synth import SynthConfig, bias_experiment, generate
from .tsls import (
    DEMAND_SPEC,
    SUPPLY_SPEC,
    StageSpec,
    TwoStageResult,
    fit_demand,
    fit_direct_ols,
    fit_supply,
    fit_two_stage,
)

__version__ = "0.1.0"
