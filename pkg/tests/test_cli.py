import csv
import io
import json
import math

import numpy as np
import pytest

from clockbudget import cli
from clockbudget.fixtures import ENV_VAR, fixture_path
from clockbudget.spectra import ssb_to_sz


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_convert_satisfies_conversion_at_every_row(capsys):
    code, out, _ = run(capsys, "convert", "labgrade-like")
    assert code == 0
    assert out.startswith("# manifest-sha256: ")
    rows = table(out)
    assert len(rows) == 8 and set(rows[0]) == {"omega_rad_s", "L_dBc_per_Hz", "S_z_rad2_s-2_per_Hz"}
    for r in rows:
        w, l, s = float(r["omega_rad_s"]), float(r["L_dBc_per_Hz"]), float(r["S_z_rad2_s-2_per_Hz"])
        assert s == pytest.approx(ssb_to_sz(w, l), rel=1e-11)


def test_missing_file_names_path(capsys):
    code, _, err = run(capsys, "convert", "/nope/missing.csv")
    assert code == cli.EXIT_INPUT and "/nope/missing.csv" in err


def test_parse_error_reports_row(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("10,-80\n5,-90\n")
    code, _, err = run(capsys, "convert", bad)
    assert code == cli.EXIT_INPUT and "row 2" in err


def test_convert_model_emits_fit_document(capsys):
    code, out, _ = run(capsys, "convert", "precision-like", "--model")
    doc = json.loads(out)
    assert code == 0 and "segments" in doc and doc["max_residual_db"] >= 0
    assert "manifest_sha256" in doc


def test_model_document_is_a_valid_spectrum_source(capsys, tmp_path):
    model = tmp_path / "m.json"
    assert run(capsys, "fit", "labgrade-like", "--out", model)[0] == 0
    code, out, _ = run(capsys, "infidelity", model, "--tau-min", 1e-6, "--tau-max", 1e-6, "--tau-points", 1)
    assert code == 0 and float(table(out)[0]["infidelity_dimensionless"]) > 0


def test_ramsey_white_fm_monotone(capsys):
    code, out, _ = run(capsys, "infidelity", "synthetic:white-fm:100", "--tau-min", 1e-8, "--tau-max", 1e-3,
                       "--tau-points", 6)
    inf = [float(r["infidelity_dimensionless"]) for r in table(out)]
    assert code == 0 and np.all(np.diff(inf) > 0)


def test_two_protocols_share_tau_grid(capsys):
    code, out, _ = run(capsys, "infidelity", "labgrade-like", "--protocol", "wamf-pi", "primitive-pi",
                       "--tau-min", 1e-7, "--tau-max", 1e-4, "--tau-points", 4, "--band-max", 1e6)
    rows = table(out)
    grids = {p: [r["tau_s"] for r in rows if r["protocol"] == p] for p in ("wamf-pi", "primitive-pi")}
    assert code == 0 and len(grids["wamf-pi"]) == 4 and grids["wamf-pi"] == grids["primitive-pi"]
    assert set(rows[0]) >= {"chi_dimensionless", "quadrature_flagged"}


def test_long_tau_warns(capsys):
    code, _, err = run(capsys, "infidelity", "synthetic:white-fm", "--tau-min", 0.1, "--tau-max", 0.2,
                       "--tau-points", 2, "--band-min", 10, "--band-max", 1e3)
    assert code == 0 and "warning:" in err and "100 ms" in err


def test_band_beyond_tabulated_range_warns(capsys):
    code, _, err = run(capsys, "infidelity", "labgrade-like", "--tau-min", 1e-6, "--tau-max", 1e-6,
                       "--tau-points", 1, "--band-max", 1e8)
    assert code == 0 and "extrapolated" in err


def floors(out):
    return {(r["protocol"], float(r["bandwidth_hz"])): float(r["infidelity_floor_dimensionless"])
            for r in table(out)}


def test_thermal_floor_table(capsys):
    code, out, _ = run(capsys, "thermal-floor", "--temperature", 290, "--protocol", "ramsey", "echo")
    f = floors(out)
    assert code == 0 and len(f) == 6
    assert f["ramsey", 1e9] / f["ramsey", 1e8] == pytest.approx(10, rel=0.01)
    assert f["ramsey", 1e10] / f["ramsey", 1e8] == pytest.approx(100, rel=0.01)
    assert f["echo", 1e8] / f["ramsey", 1e8] == pytest.approx(3, rel=0.05)
    assert all(r["valid"] == "1" for r in table(out))


def test_thermal_floor_temperature_scaling_is_linear_in_t(capsys):
    f290 = floors(run(capsys, "thermal-floor", "--temperature", 290)[1])
    f4 = floors(run(capsys, "thermal-floor", "--temperature", 4)[1])
    assert f290["ramsey", 1e8] / f4["ramsey", 1e8] == pytest.approx(290 / 4, rel=1e-9)


def test_thermal_floor_requires_source(capsys):
    with pytest.raises(SystemExit):
        cli.main(["thermal-floor"])
    capsys.readouterr()


def test_qec_budget_zero_spectrum(capsys):
    code, out, _ = run(capsys, "qec-budget", "zero")
    rows = table(out)
    assert code == 0 and len(rows) == 5 and all(r["tau_s"] == "> 100 ms" for r in rows)


def test_qec_budget_monotone_and_consistent_with_infidelity(capsys):
    src = "synthetic:white-fm:1000"
    code, out, _ = run(capsys, "qec-budget", src)
    rows = table(out)
    taus = [float(r["tau_s"]) for r in rows]
    assert code == 0 and all(b <= a for a, b in zip(taus, taus[1:]))
    for r in rows[1:4]:
        tau, p = float(r["tau_s"]), float(r["target_infidelity_dimensionless"])
        _, out2, _ = run(capsys, "infidelity", src, "--tau-min", tau, "--tau-max", tau, "--tau-points", 1)
        assert float(table(out2)[0]["infidelity_dimensionless"]) == pytest.approx(p, rel=0.01)


def test_qec_rejects_bad_targets(capsys):
    assert run(capsys, "qec-budget", "zero", "--targets", "0.7")[0] == cli.EXIT_INPUT


@pytest.mark.parametrize("protocol", ["ramsey", "echo"])
def test_validate_passes_on_white_fm(capsys, protocol):
    argv = ["validate", "synthetic:white-fm", "--protocol", protocol, "--tau", 1e-6, "--target-chi", 1e-2,
            "--realizations", 2000, "--seed", 3]
    code, out, _ = run(capsys, *argv)
    report = dict(line.split(",", 1) for line in out.splitlines() if not line.startswith("#"))
    assert code == 0 and report["result"] == "PASS"
    assert float(report["chi_ff_dimensionless"]) == pytest.approx(1e-2)
    assert run(capsys, *argv)[1] == out


def test_validate_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(cli, "ORACLE_RTOL", 0.0)
    code, out, err = run(capsys, "validate", "synthetic:white-fm", "--tau", 1e-6, "--target-chi", 1e-2,
                         "--realizations", 200)
    assert code == cli.EXIT_NUMERIC and "result,FAIL" in out


def test_validate_small_ensemble_rejected(capsys):
    assert run(capsys, "validate", "synthetic:white-fm", "--realizations", 50)[0] == cli.EXIT_INPUT


def test_rerun_reproduces_bytes(capsys, tmp_path):
    out = tmp_path / "curve.csv"
    code, _, _ = run(capsys, "infidelity", "labgrade-like", "--protocol", "echo", "--tau-min", 1e-6,
                     "--tau-max", 1e-5, "--tau-points", 3, "--out", out)
    manifest = tmp_path / "curve.csv.manifest.json"
    assert code == 0 and manifest.is_file()
    doc = json.loads(manifest.read_text())
    assert doc["command"] == "infidelity" and doc["tool_version"]
    assert list(doc["input_digests"]) == ["labgrade-like"]
    again = tmp_path / "again.csv"
    assert run(capsys, "rerun", manifest, "--out", again)[0] == 0
    assert again.read_bytes() == out.read_bytes()


def test_rerun_detects_changed_input(capsys, tmp_path):
    src = tmp_path / "c.csv"
    src.write_text("1e3,-100\n1e5,-120\n")
    out = tmp_path / "o.csv"
    run(capsys, "convert", src, "--out", out)
    src.write_text("1e3,-101\n1e5,-120\n")
    assert run(capsys, "rerun", tmp_path / "o.csv.manifest.json")[0] == cli.EXIT_INPUT


def test_config_presets_and_flags_win(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"tau_points": 2, "tau_min_s": 1e-6, "tau_max_s": 1e-5, "protocol": "echo"}))
    _, out, _ = run(capsys, "infidelity", "synthetic:white-fm", "--config", cfg)
    rows = table(out)
    assert len(rows) == 2 and rows[0]["protocol"] == "echo"
    _, out, _ = run(capsys, "infidelity", "synthetic:white-fm", "--config", cfg, "--tau-points", 3)
    assert len(table(out)) == 3


def test_fixture_directory_override(capsys, tmp_path, monkeypatch):
    (tmp_path / "labgrade_like.csv").write_text("1e3,-100\n1e4,-110\n1e5,-120\n")
    monkeypatch.setenv(ENV_VAR, str(tmp_path))
    assert fixture_path("labgrade-like").parent == tmp_path
    _, out, _ = run(capsys, "convert", "labgrade-like")
    assert len(table(out)) == 3


@pytest.mark.parametrize("argv", [
    ["infidelity", "synthetic:pink"],
    ["infidelity", "zero", "--band-min", 10, "--band-max", 1],
    ["infidelity", "zero", "--tau-min", 1e-12],
    ["thermal-floor", "--temperature", -3],
])
def test_input_errors_exit_one(capsys, argv):
    assert run(capsys, *argv)[0] == cli.EXIT_INPUT


def test_numeric_headers_carry_units(capsys):
    _, out, _ = run(capsys, "thermal-floor", "--floor-dbc", -174)
    header = [ln for ln in out.splitlines() if not ln.startswith("#")][0].split(",")
    unitless = {"protocol", "valid"}
    assert all("_" in h for h in header if h not in unitless)
    assert not math.isnan(float(table(out)[0]["kappa_dimensionless"]))
