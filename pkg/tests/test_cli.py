"""End-to-end runs of the command line interface via subprocess."""

import json
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
SRM = REPO / "scenarios" / "srm.json"


def run_cli(*args, **kwargs):
    return subprocess.run([sys.executable, "-m", "blockspin", *args],
                          capture_output=True, text=True, cwd=REPO, **kwargs)


def write_config(tmp_path, **overrides):
    raw = {"seed": 4, "suites": ["qcheck", "lattice"]}
    raw.update(overrides)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(raw))
    return path


def test_verify_passes_and_emits_json(tmp_path):
    cfg = write_config(tmp_path)
    out = run_cli("verify", "--config", str(cfg))
    assert out.returncode == 0, out.stderr
    report = json.loads(out.stdout)
    assert report["summary"]["passed"] is True
    assert [s["name"] for s in report["suites"]] == ["lattice", "qcheck"]


def test_verify_reference_scenario_passes():
    out = run_cli("verify", "--config", str(SRM), "--suite", "woodbury",
                  "--suite", "gaussian-detd")
    assert out.returncode == 0, out.stderr
    report = json.loads(out.stdout)
    assert report["summary"]["checks"] == 4
    assert report["config"]["seed"] == 1


def test_verify_exit_1_on_check_failure(tmp_path):
    cfg = write_config(tmp_path, suites=["qcheck"],
                       tolerances={"qcheck": 1e-20})
    out = run_cli("verify", "--config", str(cfg))
    assert out.returncode == 1
    assert json.loads(out.stdout)["summary"]["failures"] == 1


def test_verify_exit_2_names_bad_field(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"seed": "one"}))
    out = run_cli("verify", "--config", str(cfg))
    assert out.returncode == 2
    assert "'seed'" in out.stderr


def test_verify_exit_2_on_missing_config(tmp_path):
    out = run_cli("verify", "--config", str(tmp_path / "gone.json"))
    assert out.returncode == 2
    assert "cannot read config" in out.stderr


def test_verify_reports_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, suites=["woodbury", "edA"])
    a = run_cli("verify", "--config", str(cfg))
    b = run_cli("verify", "--config", str(cfg))
    assert a.returncode == b.returncode == 0
    assert a.stdout == b.stdout


def test_verify_text_format_and_out_file(tmp_path):
    cfg = write_config(tmp_path, suites=["qcheck"])
    dest = tmp_path / "report.txt"
    out = run_cli("verify", "--config", str(cfg), "--format", "text",
                  "--out", str(dest))
    assert out.returncode == 0
    assert out.stdout == ""
    text = dest.read_text()
    assert "dual-representations-agree" in text
    assert "PASS" in text


def test_verify_rejects_unknown_suite_flag(tmp_path):
    cfg = write_config(tmp_path)
    out = run_cli("verify", "--config", str(cfg), "--suite", "nonsense")
    assert out.returncode == 2
    assert "unknown suite" in out.stderr


def test_solve_background_round_trip(tmp_path):
    point = tmp_path / "point.json"
    point.write_text(json.dumps(
        {"psi_star": {"re": [0.2], "im": [0.05]}, "psi": [0.3]}))
    out = run_cli("solve-background", "--config", str(SRM),
                  "--point", str(point))
    assert out.returncode == 0, out.stderr
    sol = json.loads(out.stdout)
    assert float(sol["residual"]) < 1e-10
    # reference closed form: phi*_bg = psi*/2 (1 + g psi)^{-1/2}, g = 0.05
    want = complex(0.2, 0.05) / 2.0 / (1.0 + 0.05 * 0.3) ** 0.5
    assert abs(complex(sol["phi_star"]["re"][0], sol["phi_star"]["im"][0]) - want) < 1e-12


def test_solve_critical_round_trip(tmp_path):
    point = tmp_path / "point.json"
    point.write_text(json.dumps({"theta_star": [0.4], "theta": [0.1]}))
    out = run_cli("solve-critical", "--config", str(SRM),
                  "--point", str(point))
    assert out.returncode == 0, out.stderr
    sol = json.loads(out.stdout)
    assert float(sol["residual"]) < 1e-10
    # leading terms: psi_cr = 2 theta / 3 - g theta^2 / 27 + ...
    approx = 2 * 0.1 / 3 - 0.05 * 0.01 / 27
    assert abs(sol["psi"]["re"][0] - approx) < 1e-6


def test_solve_rejects_malformed_point(tmp_path):
    point = tmp_path / "point.json"
    point.write_text(json.dumps({"theta_star": [0.1, 0.2], "theta": [0.1]}))
    out = run_cli("solve-critical", "--config", str(SRM), "--point", str(point))
    assert out.returncode == 2
    assert "theta_star" in out.stderr


def test_solve_rejects_unknown_point_field(tmp_path):
    point = tmp_path / "point.json"
    point.write_text(json.dumps({"psi_star": [0.1], "psi": [0.1], "junk": 1}))
    out = run_cli("solve-background", "--config", str(SRM), "--point", str(point))
    assert out.returncode == 2
    assert "junk" in out.stderr


def test_kernels_diagnostics_only():
    out = run_cli("kernels", "--config", str(SRM))
    assert out.returncode == 0
    payload = json.loads(out.stdout)
    assert set(payload) == {"diagnostics"}
    assert payload["diagnostics"]["cond_cov"] == "1"


def test_kernels_dump_includes_reference_values():
    out = run_cli("kernels", "--config", str(SRM), "--dump")
    assert out.returncode == 0
    payload = json.loads(out.stdout)
    assert payload["qcheck"]["re"][0][0] == 0.5
    assert payload["s"]["re"][0][0] == 0.5
    assert abs(payload["scheck"]["re"][0][0] - 2 / 3) < 1e-15
    assert payload["delta"]["re"][0][0] == 0.5
    assert abs(payload["cov"]["re"][0][0] - 2 / 3) < 1e-15


def test_unknown_format_is_usage_error(tmp_path):
    cfg = write_config(tmp_path)
    out = run_cli("verify", "--config", str(cfg), "--format", "yaml")
    assert out.returncode == 2
