"""Command-line entry point.

Every command writes its reports into ``--out``.  On failure a key-value
``error.report`` is written there as well and the exit status is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from pathlib import Path

from . import descriptive, ingest, synth, tsls, validation
from .errors import StageError, TransitModelError
from .regress import INTERCEPT, format_key_values, report_items

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _csv_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="agency-year CSV (default: shipped calibrated synthetic panel)")
    p.add_argument("--schema", help="JSON file mapping field names to column headers")
    p.add_argument("--delimiter", default=",")


def _add_fit_args(p: argparse.ArgumentParser, single: bool) -> None:
    _add_data_args(p)
    p.add_argument("--log", default="all", help="all, none, or a comma list of variables to log")
    p.add_argument("--critical-intercept", type=float)
    p.add_argument("--critical-slope", type=float)
    p.add_argument("--critical-mode", choices=("fixed", "student-t"), default="fixed")
    if single:
        p.add_argument("--response")
        p.add_argument("--regressors", type=_csv_list)
    else:
        p.add_argument("--supply-regressors", type=_csv_list)
        p.add_argument("--demand-regressors", type=_csv_list)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="transit2sls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--out", default="results", help="output directory")

    p = sub.add_parser("describe", parents=[common], help="yearly means and summary table")
    _add_data_args(p)

    p = sub.add_parser("fit-supply", parents=[common], help="supply equation only")
    _add_fit_args(p, single=True)

    p = sub.add_parser("fit-demand", parents=[common], help="demand equation (runs supply first)")
    _add_fit_args(p, single=True)
    p.add_argument("--se-mode", choices=tsls.SE_MODES, default="naive")

    p = sub.add_parser("fit-2sls", parents=[common], help="both stages")
    _add_fit_args(p, single=False)
    p.add_argument("--se-mode", choices=tsls.SE_MODES, default="naive")

    p = sub.add_parser("synth", parents=[common], help="write a synthetic panel")
    p.add_argument("--seed", type=int, default=synth.CALIBRATED.seed)
    p.add_argument("--n-agencies", type=int, default=synth.CALIBRATED.n_agencies)
    p.add_argument("--n-years", type=int, default=synth.CALIBRATED.n_years)
    p.add_argument("--rho", type=float, default=synth.CALIBRATED.rho)
    p.add_argument("--sigma-supply", type=float, default=synth.CALIBRATED.sigma_supply)
    p.add_argument("--sigma-demand", type=float, default=synth.CALIBRATED.sigma_demand)

    p = sub.add_parser("validate", parents=[common], help="simulation check of the estimators")
    p.add_argument("--seed", type=int, help="derive seeds from this instead of the shipped list")
    p.add_argument("--replications", type=int, default=200)
    p.add_argument("--sample-sizes", type=lambda s: [int(x) for x in _csv_list(s)],
                   default=list(validation.SAMPLE_SIZES))
    p.add_argument("--rho", type=float, default=validation.VALIDATION_RHO)
    return parser


# ------------------------------------------------------------------ helpers


def _load(args: argparse.Namespace) -> tuple[list[ingest.DerivedRecord], ingest.ExclusionReport]:
    schema = None
    if args.schema:
        schema = json.loads(Path(args.schema).read_text())
        if not isinstance(schema, dict):
            raise UsageError("--schema must contain a JSON object")
    source = args.input or synth.calibrated_dataset_path()
    return ingest.load_dataset(source, schema, delimiter=args.delimiter)


def _log_flags(text: str, spec: tsls.StageSpec) -> bool | tuple[str, ...]:
    if text == "all":
        return True
    if text == "none":
        return False
    names = [ingest.canonical_name(n) for n in _csv_list(text)]
    own = {spec.response_name, *spec.regressor_names}
    return tuple(n for n in names if n in own)


def _spec(base: tsls.StageSpec, args: argparse.Namespace, response: str | None,
          regressors: Sequence[str] | None) -> tsls.StageSpec:
    spec = tsls.StageSpec(response or base.response, tuple(regressors or base.regressors))
    critical = {}
    if args.critical_intercept is not None:
        critical[INTERCEPT] = args.critical_intercept
    if args.critical_slope is not None:
        critical.update({r: args.critical_slope for r in spec.regressor_names})
    return tsls.StageSpec(spec.response, spec.regressors, _log_flags(args.log, spec), critical,
                          args.critical_mode)


def _write(out: Path, name: str, text: str) -> None:
    path = out / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _exclusions_csv(reports: Sequence[tuple[str, ingest.ExclusionReport]]) -> str:
    lines = ["rule,count\n"]
    for prefix, rep in reports:
        p = f"{prefix}:" if prefix else ""
        lines.append(f"{p}rows_in,{rep.rows_in}\n")
        lines.append(f"{p}rows_out,{rep.rows_out}\n")
        lines += [f"{rule},{n}\n" for rule, n in rep.rows(p)]
    return "".join(lines)


def _write_fit(out: Path, stem: str, fit, text: str) -> None:
    _write(out, f"{stem}.report", text)
    _write(out, f"{stem}.kv", format_key_values(report_items(fit)))


# ----------------------------------------------------------------- commands


def cmd_describe(args: argparse.Namespace, out: Path) -> int:
    records, parse_report = _load(args)
    for metric in descriptive.FIGURE_METRICS:
        series = descriptive.yearly_mean(records, metric)
        _write(out, f"descriptive/{metric}.csv", series.to_csv())
    rows = descriptive.summary_table(records)
    _write(out, "descriptive/summary.csv", descriptive.summary_csv(rows))
    _write(out, "exclusions.csv", _exclusions_csv([("parse", parse_report)]))
    print(f"described {len(records)} records; tables in {out / 'descriptive'}")
    return EXIT_OK


def cmd_fit_supply(args: argparse.Namespace, out: Path) -> int:
    records, parse_report = _load(args)
    spec = _spec(tsls.SUPPLY_SPEC, args, args.response, args.regressors)
    try:
        fit = tsls.fit_supply(records, spec)
    except TransitModelError as exc:
        raise StageError("supply", exc) from exc
    text = tsls.format_supply_report(fit)
    _write_fit(out, "supply", fit, text)
    _write(out, "exclusions.csv",
           _exclusions_csv([("parse", parse_report), ("supply", fit.exclusions)]))
    print(text, end="")
    return EXIT_OK


def cmd_fit_demand(args: argparse.Namespace, out: Path) -> int:
    records, parse_report = _load(args)
    supply_spec = _spec(tsls.SUPPLY_SPEC, args, None, None)
    demand_spec = _spec(tsls.DEMAND_SPEC, args, args.response, args.regressors)
    result = tsls.fit_two_stage(records, supply_spec, demand_spec, se_mode=args.se_mode)
    text = tsls.format_demand_report(result.demand_fit)
    _write_fit(out, "demand", result.demand_fit, text)
    _write(out, "exclusions.csv", _exclusions_csv([
        ("parse", parse_report),
        ("supply", result.supply_exclusions),
        ("demand", result.demand_exclusions),
    ]))
    print(text, end="")
    return EXIT_OK


def cmd_fit_2sls(args: argparse.Namespace, out: Path) -> int:
    records, parse_report = _load(args)
    supply_spec = _spec(tsls.SUPPLY_SPEC, args, None, args.supply_regressors)
    demand_spec = _spec(tsls.DEMAND_SPEC, args, None, args.demand_regressors)
    result = tsls.fit_two_stage(records, supply_spec, demand_spec, se_mode=args.se_mode)
    supply_text = tsls.format_supply_report(result.supply_fit)
    demand_text = tsls.format_demand_report(result.demand_fit)
    _write_fit(out, "supply", result.supply_fit, supply_text)
    _write_fit(out, "demand", result.demand_fit, demand_text)
    exclusions = _exclusions_csv([
        ("parse", parse_report),
        ("supply", result.supply_exclusions),
        ("demand", result.demand_exclusions),
    ])
    _write(out, "exclusions.csv", exclusions)
    print(supply_text + "\n" + demand_text + f"\nse_mode: {result.se_mode}\n"
          f"rows: {len(records)} parsed, {len(result.supply_rows)} in supply stage, "
          f"{len(result.demand_rows)} in demand stage")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, out: Path) -> int:
    config = synth.SynthConfig(
        n_agencies=args.n_agencies,
        n_years=args.n_years,
        rho=args.rho,
        sigma_supply=args.sigma_supply,
        sigma_demand=args.sigma_demand,
        seed=args.seed,
    )
    records, truth = synth.generate(config)
    out.mkdir(parents=True, exist_ok=True)
    ingest.write_dataset(records, out / "dataset.csv")
    _write(out, "truth.txt", truth.to_text())
    print(f"wrote {len(records)} records to {out / 'dataset.csv'}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, out: Path) -> int:
    seeds = None
    if args.seed is not None:
        seeds = synth.replication_seeds(synth.SynthConfig(seed=args.seed), args.replications)
    result = validation.run_validation(
        seeds=seeds,
        replications=args.replications,
        sample_sizes=args.sample_sizes,
        rho=args.rho,
    )
    text = result.report()
    _write(out, "validate.report", text)
    print(text, end="")
    return EXIT_OK if result.passed else EXIT_FAILURE


COMMANDS = {
    "describe": cmd_describe,
    "fit-supply": cmd_fit_supply,
    "fit-demand": cmd_fit_demand,
    "fit-2sls": cmd_fit_2sls,
    "synth": cmd_synth,
    "validate": cmd_validate,
}


def _out_from_argv(argv: Sequence[str]) -> Path | None:
    for i, tok in enumerate(argv):
        if tok == "--out" and i + 1 < len(argv):
            return Path(argv[i + 1])
        if tok.startswith("--out="):
            return Path(tok.split("=", 1)[1])
    return None


def _record_error(out: Path | None, kind: str, message: str, stage: str | None = None) -> None:
    items = [("status", "error"), ("type", kind)]
    if stage:
        items.append(("stage", stage))
    items.append(("message", " ".join(message.split())))
    text = format_key_values(items)
    sys.stderr.write(text)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.report").write_text(text, encoding="utf-8")
        except OSError:
            pass


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _record_error(_out_from_argv(argv) or Path("results"), "usage", str(exc))
        return EXIT_USAGE
    out = Path(args.out)
    try:
        return COMMANDS[args.command](args, out)
    except StageError as exc:
        _record_error(out, type(exc.cause).__name__, str(exc), exc.stage)
    except UsageError as exc:
        _record_error(out, "usage", str(exc))
        return EXIT_USAGE
    except TransitModelError as exc:
        _record_error(out, type(exc).__name__, str(exc))
    except (OSError, ValueError) as exc:
        _record_error(out, type(exc).__name__, str(exc))
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
