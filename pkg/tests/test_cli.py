
import pytest

from transit2sls.cli import main
from transit2sls.descriptive import FIGURE_METRICS
from transit2sls.ingest import write_dataset
from transit2sls.regress import parse_key_values
from transit2sls.synth import SynthConfig, generate


@pytest.fixture
def small_csv(tmp_path):
    records, _ = generate(SynthConfig(n_agencies=60, n_years=3, rho=0.3, seed=3))
    path = tmp_path / "panel.csv"
    write_dataset(records, path)
    return path


def read_tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in root.rglob("*") if p.is_file()}


def test_describe_three_rows(tmp_path):
    src = tmp_path / "three.csv"
    records, _ = generate(SynthConfig(n_agencies=1, n_years=3))
    write_dataset(records, src)
    out = tmp_path / "out"
    assert main(["describe", "--input", str(src), "--out", str(out)]) == 0
    files = sorted(p.name for p in (out / "descriptive").iterdir())
    assert files == sorted([f"{m}.csv" for m in FIGURE_METRICS] + ["summary.csv"])
    vrh = (out / "descriptive" / "vrh.csv").read_text().splitlines()
    assert vrh[0] == "year,mean,n" and len(vrh) == 4
    assert (out / "exclusions.csv").read_text().startswith("rule,count\n")


def test_fit_2sls_default_dataset(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["fit-2sls", "--out", str(out)]) == 0
    supply = (out / "supply.report").read_text()
    demand = (out / "demand.report").read_text()
    assert "Parameter Estimates for the Supply Model" in supply
    for label in ("Intercept", "ACPT", "SAD", "AVOMS", "Adjusted R²", "MAE", "RMSE", "Observations"):
        assert label in supply
    for label in ("EVRH", "AFPT"):
        assert label in demand
    kv = parse_key_values((out / "demand.kv").read_text())
    assert kv["response"] == "tupt"
    exclusions = (out / "exclusions.csv").read_text().splitlines()
    assert exclusions[0] == "rule,count"
    assert "demand:rows_out,10302" in exclusions
    assert "Demand Model" in capsys.readouterr().out


def test_fit_supply_overrides(tmp_path, small_csv):
    out = tmp_path / "o"
    rc = main([
        "fit-supply", "--input", str(small_csv), "--out", str(out),
        "--regressors", "acpt,voms", "--critical-slope", "2.5", "--critical-intercept", "3",
    ])
    assert rc == 0
    kv = parse_key_values((out / "supply.kv").read_text())
    assert "sad.estimate" not in kv
    assert kv["acpt.t_critical"] == "2.5" and kv["Intercept.t_critical"] == "3.0"


def test_fit_demand_se_mode(tmp_path, small_csv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["fit-demand", "--input", str(small_csv), "--out", str(a)]) == 0
    assert main(["fit-demand", "--input", str(small_csv), "--out", str(b),
                 "--se-mode", "corrected"]) == 0
    ka = parse_key_values((a / "demand.kv").read_text())
    kb = parse_key_values((b / "demand.kv").read_text())
    assert ka["evrh.estimate"] == kb["evrh.estimate"]
    assert ka["evrh.standard_error"] != kb["evrh.standard_error"]


def test_log_none(tmp_path, small_csv):
    out = tmp_path / "o"
    assert main(["fit-supply", "--input", str(small_csv), "--out", str(out), "--log", "none"]) == 0
    assert main(["fit-supply", "--input", str(small_csv), "--out", str(out),
                 "--log", "vrh,acpt"]) == 0


def test_synth_then_fit(tmp_path):
    out = tmp_path / "s"
    assert main(["synth", "--out", str(out), "--n-agencies", "50", "--n-years", "2",
                 "--seed", "9"]) == 0
    assert (out / "truth.txt").read_text().startswith("supply_intercept=4.06")
    assert main(["fit-2sls", "--input", str(out / "dataset.csv"), "--out", str(out)]) == 0


def test_validate_small(tmp_path):
    out = tmp_path / "v"
    rc = main(["validate", "--out", str(out), "--replications", "20",
               "--sample-sizes", "500,2000"])
    text = (out / "validate.report").read_text()
    assert text.startswith("estimator,n,replications,mean_bias,std,median_abs_error\n")
    assert "verdict=" in text
    assert rc == (0 if "verdict=PASS" in text else 1)


def test_usage_error_names_flag(tmp_path, capsys):
    out = tmp_path / "e"
    assert main(["fit-2sls", "--out", str(out), "--se-mode", "robust"]) == 2
    err = parse_key_values((out / "error.report").read_text())
    assert err["type"] == "usage" and "--se-mode" in err["message"]
    assert "--se-mode" in capsys.readouterr().err


def test_estimation_error_names_stage(tmp_path, small_csv):
    out = tmp_path / "e"
    rc = main(["fit-2sls", "--input", str(small_csv), "--out", str(out),
               "--supply-regressors", "acpt,acpt"])
    assert rc == 1
    err = parse_key_values((out / "error.report").read_text())
    assert err["status"] == "error"

    rc = main(["fit-2sls", "--input", str(small_csv), "--out", str(out),
               "--demand-regressors", "evrh,acpt,sad,voms"])
    assert rc == 1
    err = parse_key_values((out / "error.report").read_text())
    assert err["stage"] == "demand" and err["type"] == "CollinearityError"


def test_missing_input_file(tmp_path):
    out = tmp_path / "e"
    assert main(["describe", "--input", str(tmp_path / "nope.csv"), "--out", str(out)]) == 1
    assert parse_key_values((out / "error.report").read_text())["type"] == "FileNotFoundError"


def test_schema_file(tmp_path):
    src = tmp_path / "ntd.csv"
    src.write_text("NTD ID;FY;VRH\nx;2005;10\ny;2005;30\n")
    schema = tmp_path / "schema.json"
    schema.write_text('{"agency_id": "NTD ID", "year": "FY", "vrh": "VRH"}')
    out = tmp_path / "o"
    assert main(["describe", "--input", str(src), "--schema", str(schema), "--delimiter", ";",
                 "--out", str(out)]) == 0
    assert (out / "descriptive" / "vrh.csv").read_text() == "year,mean,n\n2005,20.0,2\n"


def test_deterministic(tmp_path, small_csv):
    for cmd in (["fit-2sls", "--input", str(small_csv)], ["describe", "--input", str(small_csv)]):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main([*cmd, "--out", str(a)]) == 0
        assert main([*cmd, "--out", str(b)]) == 0
        assert read_tree(a) == read_tree(b)
