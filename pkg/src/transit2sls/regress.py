"""Ordinary least squares with t-test inference and goodness-of-fit measures.

The solver works on a Householder QR factorization of the design matrix;
the normal equations are never formed explicitly.  Standard errors are the
classical homoskedastic ones with residual variance ``SSE / (n - k)``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats
from scipy.linalg import solve_triangular

from .errors import (
    CollinearityError,
    DegenerateDataError,
    InsufficientDataError,
    InvalidInferenceError,
    SchemaError,
    ShapeError,
)

INTERCEPT = "Intercept"

# Defaults used by the published tables: two-sided 5% for the constant,
# one-sided 5% for slopes.
PAPER_CRITICAL_INTERCEPT = 1.96
PAPER_CRITICAL_SLOPE = 1.65

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ModelFrame:
    """Response column plus named regressor columns, one row per observation.

    ``rows`` holds the index of each row in the record list the frame was
    built from, ``labels`` the matching ``(agency_id, year)`` pairs.
    """

    response_name: str
    response: NDArray[np.float64]
    regressor_names: tuple[str, ...]
    regressors: NDArray[np.float64]
    rows: tuple[int, ...] = ()
    labels: tuple[tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        y = np.asarray(self.response, dtype=float).reshape(-1)
        x = np.asarray(self.regressors, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if len(self.regressor_names) == 1 else x.reshape(len(y), -1)
        n = y.shape[0]
        if n < 1:
            raise DegenerateDataError("model frame has no rows")
        if x.shape != (n, len(self.regressor_names)):
            raise ShapeError(
                f"regressor matrix has shape {x.shape}, expected ({n}, {len(self.regressor_names)})"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise DegenerateDataError("model frame contains non-finite values")
        if len(set(self.regressor_names)) != len(self.regressor_names):
            raise SchemaError(f"duplicate regressor names: {self.regressor_names}")
        if self.response_name in self.regressor_names:
            raise SchemaError(f"response {self.response_name!r} is also a regressor")
        rows = tuple(self.rows) if self.rows else tuple(range(n))
        if len(rows) != n:
            raise ShapeError(f"{len(rows)} row indices for {n} rows")
        if self.labels and len(self.labels) != n:
            raise ShapeError(f"{len(self.labels)} row labels for {n} rows")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "regressors", x)
        object.__setattr__(self, "regressor_names", tuple(self.regressor_names))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n(self) -> int:
        return self.response.shape[0]

    def column(self, name: str) -> NDArray[np.float64]:
        if name == self.response_name:
            return self.response
        try:
            return self.regressors[:, self.regressor_names.index(name)]
        except ValueError:
            raise SchemaError(f"frame has no column {name!r}") from None

    def design(self) -> NDArray[np.float64]:
        """Regressors with a leading column of ones."""
        return np.column_stack([np.ones(self.n), self.regressors])


@dataclass(frozen=True)
class CoefficientEstimate:
    name: str
    estimate: float
    standard_error: float
    t_statistic: float
    critical_value: float
    significant: bool

    @property
    def decision(self) -> str:
        return "Significant" if self.significant else "Not significant"


@dataclass(frozen=True)
class FitDiagnostics:
    adjusted_r_squared: float
    r_squared: float
    mae: float
    rmse: float
    n: int
    k: int
    residuals: NDArray[np.float64] = field(repr=False)


@dataclass(frozen=True)
class FitResult:
    """One estimated equation.

    ``coefficients[0]`` is always the intercept.  ``cov_unscaled`` is
    ``(X'X)^-1`` for the design with intercept, kept so that standard
    errors can be rescaled with a different residual variance.
    """

    response_name: str
    coefficients: tuple[CoefficientEstimate, ...]
    diagnostics: FitDiagnostics
    fitted: NDArray[np.float64] = field(repr=False)
    frame: ModelFrame = field(repr=False)
    cov_unscaled: NDArray[np.float64] = field(repr=False)
    sigma2: float = float("nan")
    exclusions: object = field(default=None, repr=False, compare=False)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.coefficients)

    @property
    def params(self) -> NDArray[np.float64]:
        return np.array([c.estimate for c in self.coefficients])

    @property
    def intercept(self) -> float:
        return self.coefficients[0].estimate

    def __getitem__(self, name: str) -> CoefficientEstimate:
        for c in self.coefficients:
            if c.name == name:
                return c
        raise KeyError(name)


# --------------------------------------------------------------------- solver


def solve_least_squares(
    design: ArrayLike,
    response: ArrayLike,
    column_names: Sequence[str] | None = None,
    rtol: float = RANK_RTOL,
) -> NDArray[np.float64]:
    """Coefficients minimizing ``||response - design @ beta||``.

    Raises
    ------
    InsufficientDataError
        If the design has fewer rows than columns.
    CollinearityError
        If a diagonal entry of ``R`` falls below ``rtol`` times the largest
        column norm.  The error names the first offending column.
    """
    beta, _ = _qr_solve(design, response, column_names, rtol)
    return beta


def _qr_solve(
    design: ArrayLike,
    response: ArrayLike,
    column_names: Sequence[str] | None,
    rtol: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    x = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float).reshape(-1)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n, k = x.shape
    if y.shape[0] != n:
        raise ShapeError(f"design has {n} rows but response has {y.shape[0]}")
    if n < k:
        raise InsufficientDataError(f"{n} observations for {k} parameters")
    if k == 0:
        raise SchemaError("design has no columns")

    q, r = np.linalg.qr(x, mode="reduced")
    scale = float(np.max(np.linalg.norm(x, axis=0)))
    tol = rtol * scale if scale > 0 else rtol
    diag = np.abs(np.diag(r))
    bad = np.flatnonzero(diag <= tol)
    if bad.size:
        j = int(bad[0])
        name = column_names[j] if column_names is not None else j
        raise CollinearityError(
            f"design is rank deficient: column {name!r} is (nearly) a linear "
            f"combination of the preceding columns",
            column=name,
        )
    beta = solve_triangular(r, q.T @ y, lower=False)
    return beta, r


# ----------------------------------------------------------------- inference


def t_test(estimate: float, standard_error: float, critical_value: float) -> tuple[float, bool]:
    """Return ``(t, significant)`` with ``significant`` iff ``|t| >= critical_value``."""
    if not standard_error > 0 or not math.isfinite(standard_error):
        raise InvalidInferenceError(f"standard error must be positive, got {standard_error!r}")
    if not critical_value > 0:
        raise InvalidInferenceError(f"critical value must be positive, got {critical_value!r}")
    t = estimate / standard_error
    return t, bool(abs(t) >= critical_value)


def critical_values(
    names: Sequence[str],
    df: int,
    mode: str = "fixed",
    overrides: Mapping[str, float] | None = None,
    alpha: float = 0.05,
) -> list[float]:
    """Per-coefficient critical t values.

    ``mode="fixed"`` gives 1.96 for the intercept and 1.65 for slopes.
    ``mode="student-t"`` keeps the same two-sided/one-sided split but takes
    exact Student-t quantiles at ``df`` degrees of freedom.
    """
    if mode == "fixed":
        crit = [PAPER_CRITICAL_INTERCEPT if n == INTERCEPT else PAPER_CRITICAL_SLOPE for n in names]
    elif mode in ("student-t", "student_t", "exact"):
        if df < 1:
            raise InsufficientDataError("no residual degrees of freedom")
        two = float(stats.t.ppf(1 - alpha / 2, df))
        one = float(stats.t.ppf(1 - alpha, df))
        crit = [two if n == INTERCEPT else one for n in names]
    else:
        raise ValueError(f"unknown critical value mode {mode!r}")
    if overrides:
        unknown = set(overrides) - set(names)
        if unknown:
            raise SchemaError(f"critical values given for unknown coefficients {sorted(unknown)}")
        crit = [float(overrides.get(n, c)) for n, c in zip(names, crit)]
    return crit


def _coefficient(name: str, est: float, se: float, crit: float) -> CoefficientEstimate:
    if se > 0:
        t, sig = t_test(est, se, crit)
    else:
        # exact fit: no sampling error, any nonzero estimate is "significant"
        t = math.copysign(math.inf, est) if est != 0 else math.nan
        sig = est != 0
    return CoefficientEstimate(name, float(est), float(se), float(t), float(crit), bool(sig))


# --------------------------------------------------------------- diagnostics


def _pair(observed: ArrayLike, fitted: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    y = np.asarray(observed, dtype=float).reshape(-1)
    yhat = np.asarray(fitted, dtype=float).reshape(-1)
    if y.shape != yhat.shape:
        raise ShapeError(f"observed has length {y.size}, fitted has length {yhat.size}")
    if y.size == 0:
        raise ShapeError("empty input")
    return y, yhat


def mae(observed: ArrayLike, fitted: ArrayLike) -> float:
    """Mean absolute error."""
    y, yhat = _pair(observed, fitted)
    return float(np.mean(np.abs(y - yhat)))


def rmse(observed: ArrayLike, fitted: ArrayLike) -> float:
    """Root mean squared error."""
    y, yhat = _pair(observed, fitted)
    resid = np.abs(y - yhat)
    top = float(resid.max())
    if top == 0 or not math.isfinite(top):
        return top
    # scaled so tiny or huge residuals do not under/overflow when squared
    return top * float(np.sqrt(np.mean((resid / top) ** 2)))


def r_squared(observed: ArrayLike, fitted: ArrayLike) -> float:
    y, yhat = _pair(observed, fitted)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        raise DegenerateDataError("observed response is constant")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / sst


def adjusted_r_squared(observed: ArrayLike, fitted: ArrayLike, k: int) -> float:
    """``1 - (SSE / (n - k)) / (SST / (n - 1))``; ``k`` counts the intercept."""
    y, yhat = _pair(observed, fitted)
    n = y.size
    if n <= k or n <= 1:
        raise InsufficientDataError(f"adjusted R² needs n > k and n > 1 (n={n}, k={k})")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        raise DegenerateDataError("observed response is constant")
    sse = float(np.sum((y - yhat) ** 2))
    return 1.0 - (sse / (n - k)) / (sst / (n - 1))


# ------------------------------------------------------------------- fitting


def fit_ols(
    frame: ModelFrame,
    critical: Mapping[str, float] | None = None,
    critical_mode: str = "fixed",
) -> FitResult:
    """Regress ``frame.response`` on its regressors plus an intercept."""
    names = (INTERCEPT, *frame.regressor_names)
    n, k = frame.n, len(names)
    if n <= k:
        raise InsufficientDataError(f"{n} observations for {k} parameters; need n > k")
    x = frame.design()
    y = frame.response
    beta, r = _qr_solve(x, y, names, RANK_RTOL)
    fitted = x @ beta
    resid = y - fitted
    sse = float(resid @ resid)
    sigma2 = sse / (n - k)
    r_inv = solve_triangular(r, np.eye(k), lower=False)
    cov_unscaled = r_inv @ r_inv.T
    crit = critical_values(names, n - k, critical_mode, critical)
    coefs = _build_coefficients(names, beta, cov_unscaled, sigma2, crit)
    diag = _diagnostics(y, fitted, k)
    fitted.setflags(write=False)
    return FitResult(frame.response_name, coefs, diag, fitted, frame, cov_unscaled, sigma2)


def _build_coefficients(
    names: Sequence[str],
    beta: NDArray[np.float64],
    cov_unscaled: NDArray[np.float64],
    sigma2: float,
    crit: Sequence[float],
) -> tuple[CoefficientEstimate, ...]:
    se = np.sqrt(np.maximum(sigma2 * np.diag(cov_unscaled), 0.0))
    return tuple(_coefficient(nm, b, s, c) for nm, b, s, c in zip(names, beta, se, crit))


def _diagnostics(y: NDArray[np.float64], fitted: NDArray[np.float64], k: int) -> FitDiagnostics:
    resid = y - fitted
    resid.setflags(write=False)
    return FitDiagnostics(
        adjusted_r_squared=adjusted_r_squared(y, fitted, k),
        r_squared=r_squared(y, fitted),
        mae=mae(y, fitted),
        rmse=rmse(y, fitted),
        n=y.size,
        k=k,
        residuals=resid,
    )


def rescale_standard_errors(fit: FitResult, sigma2: float) -> FitResult:
    """Copy of ``fit`` whose standard errors use residual variance ``sigma2``.

    Point estimates, fitted values and diagnostics are left untouched.
    """
    crit = [c.critical_value for c in fit.coefficients]
    coefs = _build_coefficients(fit.names, fit.params, fit.cov_unscaled, sigma2, crit)
    return replace(fit, coefficients=coefs, sigma2=sigma2)


def predict(fit: FitResult, frame: ModelFrame) -> NDArray[np.float64]:
    """``intercept + sum(beta_j * x_j)`` for every row of ``frame``."""
    if tuple(frame.regressor_names) != fit.names[1:]:
        raise SchemaError(
            f"frame regressors {frame.regressor_names} do not match fit {fit.names[1:]}"
        )
    return fit.intercept + frame.regressors @ fit.params[1:]


# ----------------------------------------------------------------- reporting


def format_report(
    fit: FitResult, title: str | None = None, labels: Mapping[str, str] | None = None
) -> str:
    """Human-readable table: one row per parameter, then R²a, MAE, RMSE, n.

    ``labels`` optionally maps coefficient names to display names.
    """
    labels = labels or {}
    lines = []
    if title:
        lines.append(title)
    header = f"{'Parameter':<14}{'Estimate':>12}{'t-value':>12}{'t-critical':>12}  Decision"
    lines.append(header)
    lines.append("-" * len(header) + "-" * 14)
    for c in fit.coefficients:
        lines.append(
            f"{labels.get(c.name, c.name):<14}{c.estimate:>12.4f}{c.t_statistic:>12.2f}{c.critical_value:>12.2f}  {c.decision}"
        )
    d = fit.diagnostics
    lines.append(f"{'Adjusted R²':<14}{d.adjusted_r_squared:>12.4f}")
    lines.append(f"{'MAE':<14}{d.mae:>12.4f}")
    lines.append(f"{'RMSE':<14}{d.rmse:>12.4f}")
    lines.append(f"{'Observations':<14}{d.n:>12d}")
    return "\n".join(lines) + "\n"


def report_items(fit: FitResult) -> list[tuple[str, str]]:
    """Machine-readable ``(key, value)`` pairs at full float precision."""
    items: list[tuple[str, str]] = [("response", fit.response_name)]
    for c in fit.coefficients:
        items += [
            (f"{c.name}.estimate", repr(c.estimate)),
            (f"{c.name}.standard_error", repr(c.standard_error)),
            (f"{c.name}.t_value", repr(c.t_statistic)),
            (f"{c.name}.t_critical", repr(c.critical_value)),
            (f"{c.name}.decision", c.decision),
        ]
    d = fit.diagnostics
    items += [
        ("adjusted_r_squared", repr(d.adjusted_r_squared)),
        ("mae", repr(d.mae)),
        ("rmse", repr(d.rmse)),
        ("observations", str(d.n)),
        ("parameters", str(d.k)),
    ]
    return items


def format_key_values(items: Sequence[tuple[str, str]]) -> str:
    return "".join(f"{k}={v}\n" for k, v in items)


def parse_key_values(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed key-value line: {line!r}")
        out[key.strip()] = value.strip()
    return out
