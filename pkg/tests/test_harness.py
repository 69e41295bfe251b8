"""Check reports, suite runs, report serialization and the CLI."""

import json

import pytest

from kmseries import cli, registry, reports, sampler
from kmseries.params import ParamSet
from kmseries.reports import CheckReport, SuiteConfig, check, run_suite


def _sample(ident: str, seed: int = 6):
    return sampler.sample(ident, sampler.SampleConfig(seed=seed), 1)[0]


def _strip_timing(doc: dict) -> dict:
    doc = dict(doc)
    doc.pop("total_runtime_ms")
    doc["reports"] = [
        {k: v for k, v in r.items() if k != "wall_time_ms"} for r in doc["reports"]
    ]
    return doc


def test_check_produces_passing_report():
    rep = check(_sample("cor_milne_dougall"), tol=1e-25)
    assert rep.passed
    assert float(rep.rel_error) <= 1e-25
    assert rep.lhs_diag["converged"] and rep.rhs_diag["converged"]
    assert rep.error is None


def test_check_never_raises_on_bad_params():
    ps = _sample("cor_2l")
    ps.scalars["_w"] = ("0.9", "0.0")  # pushes the argument modulus past 1
    rep = check(ps, tol=1e-18)
    assert not rep.passed
    assert rep.error is not None and "ConstraintViolated" in rep.error


def test_report_json_round_trip_is_byte_identical():
    rep = check(_sample("cl_3h3"), tol=1e-18)
    blob = json.dumps(rep.to_json(), indent=2, sort_keys=True)
    again = CheckReport.from_json(json.loads(blob))
    assert json.dumps(again.to_json(), indent=2, sort_keys=True) == blob


def test_suite_doc_round_trip_and_schema_version():
    doc = run_suite(SuiteConfig(identities=["cor_pkb"], samples=2))
    assert doc["schema_version"] == reports.SCHEMA_VERSION
    blob = reports.serialize_report(doc)
    assert reports.serialize_report(json.loads(blob)) == blob


def test_suite_empty_filter_is_empty():
    doc = run_suite(SuiteConfig(identities=[], samples=3))
    assert doc["reports"] == [] and doc["summary"] == {}
    assert doc["all_passed"]


def test_suite_serial_equals_parallel():
    ids = ["cor_kajihara_watson", "cl_bi"]
    serial = run_suite(SuiteConfig(identities=ids, samples=2, workers=0))
    parallel = run_suite(SuiteConfig(identities=ids, samples=2, workers=3))
    assert _strip_timing(serial) == _strip_timing(parallel)


def test_suite_reports_in_deterministic_order():
    ids = ["eq_pbt", "cl_us"]
    doc = run_suite(SuiteConfig(identities=ids, samples=2, workers=2))
    keys = [(r["identity"], r["sample_index"]) for r in doc["reports"]]
    assert keys == sorted(keys)


def test_tolerance_floor_enforced():
    with pytest.raises(ValueError):
        SuiteConfig(tolerance=1e-80, precision_bits=128)
    SuiteConfig(tolerance=1e-30, precision_bits=256)  # fine


def test_relative_error_absolute_near_zero():
    from gmpy2 import mpc

    assert reports.relative_error(mpc(0), mpc(0)) == 0.0
    assert reports.relative_error(mpc(1e-70), mpc(0)) < 1e-60


def test_radius_sweep_rows_decrease():
    ps = _sample("cor_c3")
    rows = reports.radius_sweep(ps, [6, 12, 18, 24])
    gaps = [float(r["abs_gap"]) for r in rows]
    assert gaps[-1] < gaps[0]
    assert [r["radius"] for r in rows] == [6, 12, 18, 24]


# ---------------------------------------------------------------------------
# CLI

def test_cli_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "gustafson_6psi6" in out and "cl_3h3" in out


def test_cli_check_pass(tmp_path):
    out = tmp_path / "rep.json"
    code = cli.main(["check", "--id", "cor_milne_saalschutz", "--seed", "2",
                     "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["passed"] and doc["identity"] == "cor_milne_saalschutz"


def test_cli_check_explicit_params(tmp_path):
    ps = _sample("cor_mnc")
    pfile = tmp_path / "params.json"
    pfile.write_text(json.dumps(ps.to_json()))
    assert cli.main(["check", "--id", "cor_mnc", "--params", str(pfile)]) == 0


def test_cli_suite_exit_codes(tmp_path, capsys):
    out = tmp_path / "suite.json"
    code = cli.main(["suite", "--id", "cor_kajihara_bailey", "--samples", "2",
                     "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["all_passed"] and len(doc["reports"]) == 2


def test_cli_suite_config_file(tmp_path):
    cfgfile = tmp_path / "suite.toml"
    cfgfile.write_text(
        '[suite]\nidentities = ["cl_km"]\nsamples = 2\ntolerance = 1e-18\n'
    )
    assert cli.main(["suite", "--config", str(cfgfile)]) == 0


def test_cli_suite_config_rejects_unknown_field(tmp_path):
    cfgfile = tmp_path / "suite.toml"
    cfgfile.write_text("[suite]\nfrobnicate = 1\n")
    with pytest.raises(SystemExit):
        cli.main(["suite", "--config", str(cfgfile)])


def test_cli_sweep(capsys):
    assert cli.main(["sweep", "--id", "cor_2l", "--radii", "6,12", "--seed",
                     "3"]) == 0
    out = capsys.readouterr().out
    assert "radius" in out


def test_cli_degenerations(capsys):
    assert cli.main(["degenerations", "--id", "cl_km"]) == 0
    assert cli.main(["degenerations", "--id", "gustafson_6psi6"]) == 2
