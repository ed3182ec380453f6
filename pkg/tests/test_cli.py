import json
import subprocess
import sys

import pytest

from gasketlab.cli import CONFIG_SCHEMA, main
from gasketlab.io import read_csv


def run(args):
    return main([str(a) for a in args])


def test_schema_command(capsys):
    assert run(["schema"]) == 0
    assert json.loads(capsys.readouterr().out) == CONFIG_SCHEMA


def test_scale_summary(tmp_path):
    assert run(["scale", "--levels", 2, "--depth", 3, "--out", tmp_path, "--no-plots"]) == 0
    s = json.loads((tmp_path / "scale" / "summary.json").read_text())
    assert s["results"]["r"] == pytest.approx(0.6)
    assert s["results"]["regime"] == "singular"
    assert s["passed"] and s["schema_version"] == "1.0"
    header, rows = read_csv(tmp_path / "scale" / "levels.csv")
    assert header[0] == "l" and rows[0][2] == "3/5"


def test_empty_levels_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "scale", "levels": []}))
    assert run(["run", "--config", cfg, "--out", tmp_path]) == 2
    assert "levels" in capsys.readouterr().err


def test_malformed_json_reports_line(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "kind": "scale",\n  "depth_max": 3,,\n}')
    assert run(["run", "--config", cfg]) == 2
    assert "line 3" in capsys.readouterr().err


def test_schema_violation_reports_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "kind": "scale",\n  "dimension": 1\n}')
    assert run(["run", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "dimension" in err and "line 3" in err


def test_walk_requires_seed(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "walk", "depth_max": 3}))
    assert run(["run", "--config", cfg, "--out", tmp_path]) == 2


def test_kind_mismatch(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "scale"}))
    assert run(["harmonic", "--config", cfg, "--out", tmp_path]) == 2


def test_resource_cap(tmp_path, capsys):
    assert run(["metric", "--depth", 9, "--out", tmp_path, "--no-plots"]) == 2
    assert "cap" in capsys.readouterr().err


def test_depth_override_capped(tmp_path, capsys):
    assert run(["build", "--depth", 13, "--out", tmp_path]) == 2
    assert "cap" in capsys.readouterr().err


def test_failed_invariant_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "singularity", "depth_min": 1, "depth_max": 3,
                               "tolerances": {"min_mass_target": 0.1}}))
    assert run(["run", "--config", cfg, "--out", tmp_path, "--no-plots"]) == 1
    s = json.loads((tmp_path / "singularity" / "summary.json").read_text())
    assert s["checks"]["min_mass_below_target"] is False
    assert s["checks"]["min_mass_decreasing"] is True


def test_outputs_byte_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    # shallow depths miss the slope tolerance; only identical output matters here
    codes = {run(["walk", "--depth", 4, "--seed", 3, "--out", out, "--no-plots"]) for out in (a, b)}
    assert len(codes) == 1
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file() and p.name != "timing.json")
    assert files
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_plots_written(tmp_path):
    assert run(["harmonic", "--depth", 3, "--out", tmp_path]) == 0
    d = tmp_path / "harmonic"
    assert (d / "energy.png").stat().st_size > 1000
    assert (d / "energy.dat").exists()
    manifest = json.loads((d / "manifest.json").read_text())
    assert "energy" in json.dumps(manifest)


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "gasketlab", "build", "--depth", "2", "--out", str(tmp_path),
                          "--no-plots"], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "[PASS] build" in out.stdout
