"""Command line driver: subcommands, exit codes, file formats, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from tmep.cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, EXIT_RESOURCE, main

TWO_LEVEL = """\
schema_version = 1

[model]
kind = "two-level"
omega_diag = [0.75, 0.25]
hamiltonian = [[0.0, 1.0], [1.0, 0.0]]

[grids]
times = [1.5707963267948966]
"""

DECOUPLED = """\
schema_version = 1

[model]
kind = "open-system"
dim_s = 2
coupling_strength = 0.0

[[model.reservoirs]]
chain_length = 1
beta = 1.0

[[model.reservoirs]]
chain_length = 1
beta = 2.0
"""

OPEN = DECOUPLED.replace("coupling_strength = 0.0", "coupling_strength = 0.5")


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_module_entry_point(tmp_path):
    # one subprocess smoke test; everything else drives main() in process
    cfg = write(tmp_path, "cfg.toml", TWO_LEVEL)
    proc = subprocess.run(
        [sys.executable, "-m", "tmep", "verify", "--config", cfg, "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == EXIT_OK, proc.stderr
    assert "7/7 checks passed" in proc.stdout


def test_verify_writes_reports(tmp_path, capsys):
    cfg = write(tmp_path, "cfg.toml", TWO_LEVEL)
    out = tmp_path / "out"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == EXIT_OK
    reports = json.loads((out / "reports.json").read_text())
    assert len(reports) == 7
    for rep in reports:
        assert set(rep) == {
            "check",
            "fingerprint",
            "params",
            "residual_max",
            "threshold",
            "verdict",
            "seconds",
        }
        assert rep["verdict"] == "pass"
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 8
    assert lines[-1] == "7/7 checks passed"


def test_verify_jobs_match_serial(tmp_path):
    cfg = write(tmp_path, "cfg.toml", OPEN)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["verify", "--config", cfg, "--out", str(b), "--jobs", "4"]) == EXIT_OK

    def strip(path):
        reps = json.loads((path / "reports.json").read_text())
        return [{k: v for k, v in r.items() if k != "seconds"} for r in reps]

    assert strip(a) == strip(b)


def test_verify_failing_check_exits_one(tmp_path, capsys):
    nearly_singular = TWO_LEVEL.replace("[0.75, 0.25]", "[0.9999999999999, 1e-13]")
    cfg = write(tmp_path, "cfg.toml", nearly_singular)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CHECK_FAILED
    assert "fail" in capsys.readouterr().out


def test_simulate_decoupled_is_point_mass(tmp_path):
    cfg = write(tmp_path, "cfg.toml", DECOUPLED)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
    csvs = sorted(out.glob("measure_t*.csv"))
    assert len(csvs) == 4
    for path in csvs:
        assert path.read_text() == "s,weight\n0,1\n"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert len(manifest["outputs"]) == 4
    for entry in manifest["outputs"]:
        assert entry["atom_count"] == 1
        assert entry["mean"] == 0.0


def test_simulate_deterministic_bytes(tmp_path):
    cfg = write(tmp_path, "cfg.toml", OPEN)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--out", str(b), "--jobs", "3"]) == EXIT_OK
    for pa in sorted(a.glob("*.csv")):
        pb = b / pa.name
        assert pa.read_bytes() == pb.read_bytes()


def test_scan_format_and_normalization(tmp_path):
    text = TWO_LEVEL + "\n[grids.alpha_re]\nmin = 0.0\nmax = 1.0\npoints = 3\n[grids.alpha_im]\nmin = -2.0\nmax = 2.0\npoints = 5\n"
    cfg = write(tmp_path, "cfg.toml", text)
    out = tmp_path / "out"
    assert main(["scan", "--config", cfg, "--out", str(out)]) == EXIT_OK
    path = out / "scan_t1.5707963267948966.csv"
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "re_alpha,im_alpha,re_f,im_f,route"
    rows = [ln.split(",") for ln in lines[1:]]
    # direct, trace, spectral on the full 15-point grid; cocycle-product on
    # the purely imaginary 5-point slice
    by_route = {}
    for r in rows:
        by_route.setdefault(r[4], []).append(r)
    assert {k: len(v) for k, v in by_route.items()} == {
        "direct": 15,
        "trace": 15,
        "spectral": 15,
        "cocycle-product": 5,
    }
    for r in rows:
        if float(r[0]) == 0.0 and float(r[1]) == 0.0:
            assert float(r[2]) == pytest.approx(1.0, abs=1e-11)
            assert float(r[3]) == pytest.approx(0.0, abs=1e-11)
    assert all(abs(float(r[0])) < 1e-15 for r in by_route["cocycle-product"])


def test_scaling_outputs(tmp_path, capsys):
    cfg = write(tmp_path, "cfg.toml", OPEN + "\n[scaling]\nchain_lengths = [1, 2]\n")
    out = tmp_path / "out"
    assert main(["scaling", "--config", cfg, "--out", str(out)]) == EXIT_OK
    table = (out / "scaling.csv").read_text().strip().splitlines()
    assert table[0] == "n,w1"
    assert [int(row.split(",")[0]) for row in table[1:]] == [1, 2]
    report = json.loads((out / "scaling_report.json").read_text())
    assert report["passed"] is True
    assert [row["chain_length"] for row in report["rows"]] == [1, 2]
    assert all(float(row.split(",")[1]) >= 0 for row in table[1:])
    assert "n=1" in capsys.readouterr().out


def test_scaling_needs_open_system(tmp_path):
    cfg = write(tmp_path, "cfg.toml", TWO_LEVEL)
    assert main(["scaling", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_missing_config_is_config_error(tmp_path, capsys):
    assert main(["verify", "--config", str(tmp_path / "nope.toml")]) == EXIT_CONFIG
    assert "cannot read config" in capsys.readouterr().err


def test_corrupt_config_is_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "bad.toml", "[model\nkind=")
    assert main(["verify", "--config", cfg]) == EXIT_CONFIG
    assert "not valid TOML" in capsys.readouterr().err


def test_semantic_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "bad.toml", TWO_LEVEL.replace("[0.75, 0.25]", "[0.75, 0.75]"))
    assert main(["verify", "--config", cfg]) == EXIT_CONFIG
    assert "omega_diag" in capsys.readouterr().err


def test_dimension_cap_is_resource_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TMEP_DIM_CAP", "4")
    cfg = write(tmp_path, "cfg.toml", OPEN)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_RESOURCE
    assert "above the cap" in capsys.readouterr().err


def test_emit_fixtures_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["emit-fixtures", "--out", str(a)]) == EXIT_OK
    assert main(["emit-fixtures", "--out", str(b)]) == EXIT_OK
    files_a = sorted(p.name for p in a.iterdir())
    assert files_a == sorted(p.name for p in b.iterdir())
    assert any(p.endswith(".toml") for p in files_a)
    assert any(p.endswith("manifest.json") for p in files_a)
    for name in files_a:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_emitted_fixture_verifies_clean(tmp_path):
    fix = tmp_path / "fix"
    assert main(["emit-fixtures", "--out", str(fix)]) == EXIT_OK
    toml_files = sorted(fix.glob("*.toml"))
    assert toml_files
    for cfg_path in toml_files:
        code = main(["verify", "--config", str(cfg_path), "--out", str(tmp_path / cfg_path.stem)])
        assert code == EXIT_OK, cfg_path.name


def test_unknown_subcommand_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["transmogrify"])
    assert exc.value.code == EXIT_CONFIG
    capsys.readouterr()
