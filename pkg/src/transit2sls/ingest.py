"""Reading agency-year transit records and turning them into model frames.

Records are parsed from header-bearing delimited text.  Cells that are empty
or cannot be read as a finite, nonnegative number become missing (``None``)
rather than aborting the parse; every such cell and every dropped row is
tallied in an :class:`ExclusionReport`.
"""

from __future__ import annotations

import csv
import io
import math
import os
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, fields
from typing import IO, Union

import numpy as np

from .errors import DegenerateDataError, SchemaError, ShapeError
from .regress import ModelFrame

PathOrStream = Union[str, "os.PathLike[str]", IO[str]]

NUMERIC_FIELDS: tuple[str, ...] = (
    "vrh",
    "tupt",
    "voms",
    "passenger_miles",
    "vrm",
    "avg_trip_length",
    "service_area_population",
    "service_area_sq_miles",
    "total_operating_cost",
    "total_fares",
)
DERIVED_FIELDS: tuple[str, ...] = ("sad", "acpt", "afpt")
VARIABLES: tuple[str, ...] = NUMERIC_FIELDS + DERIVED_FIELDS

# Logical field -> header.  Identity by default; pass a different map for
# NTD exports whose headers differ by vintage.
DEFAULT_SCHEMA: dict[str, str] = {
    "agency_id": "agency_id",
    "year": "year",
    **{name: name for name in NUMERIC_FIELDS},
}

DEFAULT_YEAR_RANGE = (2002, 2018)

# Upper-case names from the variable table, accepted anywhere a variable is named.
ALIASES: dict[str, str] = {
    "VRH": "vrh",
    "TUPT": "tupt",
    "UPT": "tupt",
    "VOMS": "voms",
    "AVOMS": "voms",
    "VRM": "vrm",
    "PMT": "passenger_miles",
    "SAD": "sad",
    "ACPT": "acpt",
    "AFPT": "afpt",
    "ATL": "avg_trip_length",
}

_MISSING_TOKENS = {"", "na", "n/a", "nan", "null", "none", "-", "."}

# Derived variable -> (numerator, denominator).
_RATIOS: dict[str, tuple[str, str]] = {
    "sad": ("service_area_population", "service_area_sq_miles"),
    "acpt": ("total_operating_cost", "tupt"),
    "afpt": ("total_fares", "tupt"),
}


def canonical_name(name: str) -> str:
    """Map a table alias such as ``"AVOMS"`` to its record field name."""
    key = name.strip()
    if key in ALIASES:
        return ALIASES[key]
    if key.lower() in VARIABLES:
        return key.lower()
    if key.upper() in ALIASES:
        return ALIASES[key.upper()]
    raise SchemaError(f"unknown variable {name!r}")


@dataclass(frozen=True)
class AgencyYearRecord:
    agency_id: str
    year: int
    vrh: float | None = None
    tupt: float | None = None
    voms: float | None = None
    passenger_miles: float | None = None
    vrm: float | None = None
    avg_trip_length: float | None = None
    service_area_population: float | None = None
    service_area_sq_miles: float | None = None
    total_operating_cost: float | None = None
    total_fares: float | None = None

    @property
    def label(self) -> tuple[str, int]:
        return (self.agency_id, self.year)

    def get(self, name: str) -> float | None:
        return getattr(self, canonical_name(name))


@dataclass(frozen=True)
class DerivedRecord(AgencyYearRecord):
    """A record plus service area density and per-trip cost and fare."""

    sad: float | None = None
    acpt: float | None = None
    afpt: float | None = None


@dataclass
class ExclusionReport:
    """Bookkeeping for rows dropped by one operation.

    ``missing_cells`` counts unreadable or absent cells per field; those
    cells make a value missing but do not by themselves drop the row.
    """

    rows_in: int = 0
    rows_out: int = 0
    dropped: Counter = field(default_factory=Counter)
    dropped_rows: list[tuple[str, object]] = field(default_factory=list)
    missing_cells: Counter = field(default_factory=Counter)

    def drop(self, rule: str, row_id: object) -> None:
        self.dropped[rule] += 1
        self.dropped_rows.append((rule, row_id))

    @property
    def total_dropped(self) -> int:
        return sum(self.dropped.values())

    def balanced(self) -> bool:
        return self.rows_in == self.rows_out + self.total_dropped

    def rows(self, prefix: str = "") -> list[tuple[str, int]]:
        """``(rule, count)`` pairs sorted by rule name."""
        out = [(prefix + rule, n) for rule, n in sorted(self.dropped.items())]
        out += [(f"{prefix}missing_cell:{f}", n) for f, n in sorted(self.missing_cells.items())]
        return out

    def to_csv(self, prefix: str = "") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rule", "count"])
        w.writerows(self.rows(prefix))
        return buf.getvalue()


# ------------------------------------------------------------------- parsing


def _open(source: PathOrStream, mode: str):
    if hasattr(source, "read") or hasattr(source, "write"):
        return _NoClose(source)
    return open(source, mode, newline="", encoding="utf-8")


class _NoClose:
    def __init__(self, stream):
        self.stream = stream

    def __enter__(self):
        return self.stream

    def __exit__(self, *exc):
        return False


def _parse_number(text: str) -> float | None:
    t = text.strip().replace(",", "")
    if t.lower() in _MISSING_TOKENS:
        return None
    try:
        v = float(t)
    except ValueError:
        return None
    if not math.isfinite(v) or v < 0:
        return None
    return v


def _parse_year(text: str) -> int | None:
    try:
        v = float(text.strip())
    except ValueError:
        return None
    if not math.isfinite(v) or v != int(v):
        return None
    return int(v)


def parse_dataset(
    source: PathOrStream,
    schema: Mapping[str, str] | None = None,
    delimiter: str = ",",
    year_range: tuple[int, int] = DEFAULT_YEAR_RANGE,
) -> tuple[list[AgencyYearRecord], ExclusionReport]:
    """Parse a delimited table into records, preserving row order.

    Parameters
    ----------
    source
        Path or open text stream.  The first line must be a header.
    schema
        Logical field name -> header name.  Fields absent from ``schema``
        fall back to :data:`DEFAULT_SCHEMA`; numeric columns that are not in
        the header are simply missing on every record.
    year_range
        Inclusive year bounds.  Rows outside it are dropped and reported.

    Raises
    ------
    SchemaError
        If the header lacks the ``agency_id`` or ``year`` column.
    OSError
        If the source cannot be opened.
    """
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(DEFAULT_SCHEMA)
        if unknown:
            raise SchemaError(f"schema names unknown fields {sorted(unknown)}")
        mapping.update(schema)

    with _open(source, "r") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("source is empty; a header row is required") from None
        index = {h: i for i, h in enumerate(header)}
        for key in ("agency_id", "year"):
            if mapping[key] not in index:
                raise SchemaError(f"header lacks mandatory column {mapping[key]!r} ({key})")
        cols = {f: index[mapping[f]] for f in NUMERIC_FIELDS if mapping[f] in index}
        id_col, year_col = index[mapping["agency_id"]], index[mapping["year"]]

        report = ExclusionReport()
        records: list[AgencyYearRecord] = []
        lo, hi = year_range
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            report.rows_in += 1
            row = row + [""] * (len(header) - len(row))
            agency = row[id_col].strip()
            year = _parse_year(row[year_col])
            if not agency or year is None:
                report.drop("malformed_key", lineno)
                continue
            if not lo <= year <= hi:
                report.drop("year_out_of_range", (agency, year))
                continue
            values: dict[str, float | None] = {}
            for f in NUMERIC_FIELDS:
                if f not in cols:
                    values[f] = None
                    continue
                v = _parse_number(row[cols[f]])
                if v is None:
                    report.missing_cells[f] += 1
                values[f] = v
            records.append(AgencyYearRecord(agency, year, **values))
    report.rows_out = len(records)
    return records, report


def _format_number(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def write_dataset(
    records: Iterable[AgencyYearRecord],
    dest: PathOrStream,
    schema: Mapping[str, str] | None = None,
    delimiter: str = ",",
) -> None:
    """Write raw record fields in the layout :func:`parse_dataset` reads.

    Floats are written with ``repr`` so a write/parse round trip is exact.
    """
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        mapping.update(schema)
    names = ("agency_id", "year", *NUMERIC_FIELDS)
    with _open(dest, "w") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([mapping[n] for n in names])
        for r in records:
            w.writerow(
                [r.agency_id, str(r.year)] + [_format_number(getattr(r, f)) for f in NUMERIC_FIELDS]
            )


# ---------------------------------------------------------------- derivation


def _ratio(num: float | None, den: float | None) -> float | None:
    if num is None or den is None or den <= 0:
        return None
    v = num / den
    return v if math.isfinite(v) else None


def derive_variables(record: AgencyYearRecord) -> DerivedRecord:
    """Attach ``sad``, ``acpt`` and ``afpt``; undefined ratios stay ``None``."""
    base = {f.name: getattr(record, f.name) for f in fields(AgencyYearRecord)}
    derived = {name: _ratio(base[num], base[den]) for name, (num, den) in _RATIOS.items()}
    return DerivedRecord(**base, **derived)


def derive_all(records: Iterable[AgencyYearRecord]) -> list[DerivedRecord]:
    return [derive_variables(r) for r in records]


def load_dataset(
    source: PathOrStream,
    schema: Mapping[str, str] | None = None,
    delimiter: str = ",",
    year_range: tuple[int, int] = DEFAULT_YEAR_RANGE,
) -> tuple[list[DerivedRecord], ExclusionReport]:
    """:func:`parse_dataset` followed by :func:`derive_variables`."""
    records, report = parse_dataset(source, schema, delimiter, year_range)
    return derive_all(records), report


# --------------------------------------------------------------- model frames


def _normalize_log(log: bool | str | Iterable[str] | None, names: Sequence[str]) -> set[str]:
    if log is None or log is False or log == "none":
        return set()
    if log is True or log == "all":
        return set(names)
    if isinstance(log, str):
        log = [s for s in log.split(",") if s.strip()]
    flagged = {canonical_name(s) for s in log}
    stray = flagged - set(names)
    if stray:
        raise SchemaError(f"log flag on variables not in the model: {sorted(stray)}")
    return flagged


def _missing_rule(record: DerivedRecord, name: str) -> str:
    if name in _RATIOS:
        num, den = _RATIOS[name]
        n, d = getattr(record, num), getattr(record, den)
        if n is not None and d is not None and d <= 0:
            return "division_by_zero"
    return "missing_value"


def build_model_frame(
    records: Sequence[DerivedRecord],
    response: str,
    regressors: Sequence[str],
    log: bool | str | Iterable[str] | None = True,
    extra: Mapping[str, Sequence[float]] | None = None,
) -> tuple[ModelFrame, ExclusionReport]:
    """Select, log-transform and listwise-delete into a :class:`ModelFrame`.

    Parameters
    ----------
    records
        Derived records; row ``i`` of the result remembers its index here.
    log
        ``True``/``"all"``, ``False``/``"none"``, or the variables to log.
        Values are natural logs.  Nonpositive values under a log flag drop
        the row (``nonpositive_under_log``); nothing is offset-shifted.
    extra
        Additional columns given directly as arrays aligned with
        ``records`` (``NaN`` marks a missing value).  They are used as-is,
        never logged.  This is how fitted supply values enter the demand
        stage.

    Raises
    ------
    DegenerateDataError
        If no row survives.
    """
    extra = dict(extra or {})
    for name, col in extra.items():
        if len(col) != len(records):
            raise ShapeError(f"column {name!r} has length {len(col)}, expected {len(records)}")
    resp = response if response in extra else canonical_name(response)
    regs = [r if r in extra else canonical_name(r) for r in regressors]
    names = [resp, *regs]
    if len(set(names)) != len(names):
        raise SchemaError(f"variables repeat within the model: {names}")
    logged = _normalize_log(log, [n for n in names if n not in extra])

    report = ExclusionReport(rows_in=len(records))
    data = np.empty((len(records), len(names)))
    keep = np.zeros(len(records), dtype=bool)
    for i, rec in enumerate(records):
        row_ok = True
        for j, name in enumerate(names):
            if name in extra:
                v = float(extra[name][i])
                if not math.isfinite(v):
                    report.drop(f"missing_{name.lower()}", rec.label)
                    row_ok = False
                    break
            else:
                v = getattr(rec, name)
                if v is None:
                    report.drop(_missing_rule(rec, name), rec.label)
                    row_ok = False
                    break
                if name in logged:
                    if v <= 0:
                        report.drop("nonpositive_under_log", rec.label)
                        row_ok = False
                        break
                    v = math.log(v)
            data[i, j] = v
        keep[i] = row_ok
    idx = np.flatnonzero(keep)
    report.rows_out = int(idx.size)
    if idx.size == 0:
        raise DegenerateDataError(
            f"every row was excluded building the {resp} model ({dict(report.dropped)})"
        )
    frame = ModelFrame(
        response_name=resp,
        response=data[idx, 0],
        regressor_names=tuple(regs),
        regressors=data[idx, 1:],
        rows=tuple(int(i) for i in idx),
        labels=tuple(records[i].label for i in idx),
    )
    return frame, report
