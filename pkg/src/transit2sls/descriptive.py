"""Yearly cross-agency averages and whole-dataset summary statistics."""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .ingest import VARIABLES, DerivedRecord, canonical_name

# Metrics behind the nine time-series figures, in figure order.
FIGURE_METRICS: tuple[str, ...] = (
    "vrh",
    "tupt",
    "avg_trip_length",
    "voms",
    "passenger_miles",
    "sad",
    "acpt",
    "afpt",
    "vrm",
)


@dataclass(frozen=True)
class YearlySeries:
    metric: str
    points: tuple[tuple[int, float, int], ...]

    @property
    def years(self) -> list[int]:
        return [p[0] for p in self.points]

    @property
    def means(self) -> list[float]:
        return [p[1] for p in self.points]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["year", "mean", "n"])
        for year, mean, n in self.points:
            w.writerow([year, repr(mean), n])
        return buf.getvalue()


@dataclass(frozen=True)
class SummaryRow:
    metric: str
    minimum: float | None
    maximum: float | None
    mean: float | None
    count: int


def _resolve(metric: str) -> str:
    try:
        name = canonical_name(metric)
    except SchemaError:
        raise SchemaError(f"unknown metric {metric!r}") from None
    if name not in VARIABLES:
        raise SchemaError(f"unknown metric {metric!r}")
    return name


def yearly_mean(records: Sequence[DerivedRecord], metric: str) -> YearlySeries:
    """Unweighted mean of ``metric`` per year over records where it is present.

    Years with no present value are omitted.
    """
    name = _resolve(metric)
    pairs = [(r.year, v) for r in records if (v := getattr(r, name)) is not None]
    if not pairs:
        return YearlySeries(name, ())
    years = np.array([p[0] for p in pairs])
    values = np.array([p[1] for p in pairs], dtype=float)
    uniq, inverse = np.unique(years, return_inverse=True)
    sums = np.bincount(inverse, weights=values)
    counts = np.bincount(inverse)
    points = tuple(
        (int(y), float(s / c), int(c)) for y, s, c in zip(uniq, sums, counts)
    )
    return YearlySeries(name, points)


def summary_table(
    records: Sequence[DerivedRecord], metrics: Sequence[str] = VARIABLES
) -> list[SummaryRow]:
    rows = []
    for metric in metrics:
        name = _resolve(metric)
        vals = np.array([v for r in records if (v := getattr(r, name)) is not None], dtype=float)
        if vals.size == 0:
            rows.append(SummaryRow(name, None, None, None, 0))
        else:
            rows.append(
                SummaryRow(name, float(vals.min()), float(vals.max()), float(vals.mean()), int(vals.size))
            )
    return rows


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "min", "max", "mean", "n"])
    for r in rows:
        fmt = lambda v: "" if v is None else repr(v)  # noqa: E731
        w.writerow([r.metric, fmt(r.minimum), fmt(r.maximum), fmt(r.mean), r.count])
    return buf.getvalue()
