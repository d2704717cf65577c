import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from mfsemigroup.cli import load_config, main
from mfsemigroup.errors import ConfigError

REPO = Path(__file__).resolve().parent.parent
CONFIGS = REPO / "configs"


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "mfsemigroup.cli", *args],
        capture_output=True,
        text=True,
        cwd=REPO,
    )


def write_config(tmp_path, **overrides):
    cfg = json.loads((CONFIGS / "golden_mean.json").read_text())
    cfg.update(overrides)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


# ---------------------------------------------------------------------------
# config validation


def test_load_config_golden():
    cfg = load_config(CONFIGS / "golden_mean.json")
    assert len(cfg.maps.maps) == 2
    assert cfg.depth == 4
    assert cfg.beta_steps == 33


def test_unknown_top_level_key(tmp_path):
    p = write_config(tmp_path, mystery_knob=3)
    with pytest.raises(ConfigError):
        load_config(p)


def test_bad_probabilities(tmp_path):
    p = write_config(tmp_path, probabilities=[0.5, 0.6])
    with pytest.raises(ConfigError):
        load_config(p)
    p = write_config(tmp_path, probabilities=[1.0, 0.0])
    with pytest.raises(ConfigError):
        load_config(p)


def test_too_few_beta_steps(tmp_path):
    p = write_config(tmp_path, beta={"min": -1, "max": 1, "steps": 4})
    with pytest.raises(ConfigError):
        load_config(p)


def test_oversized_resolution(tmp_path):
    p = write_config(tmp_path, coliseum={"resolution": [8193, 64]})
    with pytest.raises(ConfigError):
        load_config(p)


def test_exit_code_config_error(tmp_path):
    p = write_config(tmp_path, probabilities=[0.5, 0.6])
    r = run_cli("verify", "--config", str(p), "--out", str(tmp_path / "o"))
    assert r.returncode == 2
    assert "config error" in r.stderr


def test_exit_code_condition_failure(tmp_path):
    # overlapping monomial pair fails the separation check
    cfg = json.loads((CONFIGS / "power_pair.json").read_text())
    cfg["julia"]["target_count"] = 600
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    r = run_cli("verify", "--config", str(p), "--out", str(tmp_path / "o"))
    assert r.returncode == 3
    assert "separation" in r.stdout


def test_force_allows_spectrum_after_failed_checks(tmp_path):
    cfg = json.loads((CONFIGS / "golden_mean.json").read_text())
    cfg["julia"]["target_count"] = 600
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    r = run_cli("spectrum", "--config", str(p), "--out", str(out))
    assert r.returncode == 3
    r = run_cli("spectrum", "--config", str(p), "--force", "--out", str(out))
    assert r.returncode == 0
    assert (out / "spectrum.csv").exists()
    assert (out / "spectrum.svg").exists()
    assert (out / "free_energy.csv").exists()


def test_summary_schema(tmp_path):
    cfg = json.loads((CONFIGS / "golden_mean.json").read_text())
    cfg["julia"]["target_count"] = 600
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    r = run_cli("rigidity", "--config", str(p), "--force", "--out", str(out))
    assert r.returncode == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1
    assert summary["rigidity"]["verdict"] == "trivial"
    assert summary["delta"] == pytest.approx(1.6942, abs=1e-3)
    assert "conditions" in summary
    assert sorted(summary["files"]) == summary["files"]
    # bound afterwards reports the comparison against alpha_minus
    r = run_cli("bound", "--config", str(p), "--out", str(out))
    assert r.returncode == 0
    assert "bound - alpha_minus_hat" in r.stdout
    summary = json.loads((out / "summary.json").read_text())
    assert "bound_minus_alpha_minus" in summary["bound"]


def test_workers_flag_and_env(tmp_path):
    cfg = json.loads((CONFIGS / "golden_mean.json").read_text())
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    r = run_cli("pressure", "--config", str(p), "--workers", "3", "--out", str(out_a))
    assert r.returncode == 0
    r2 = subprocess.run(
        [sys.executable, "-m", "mfsemigroup.cli", "pressure", "--config", str(p), "--out", str(out_b)],
        capture_output=True, text=True, cwd=REPO,
        env={"MF_SEMIGROUP_WORKERS": "2", "PATH": "/usr/bin:/bin"},
    )
    assert r2.returncode == 0
    assert (out_a / "free_energy.csv").read_bytes() == (out_b / "free_energy.csv").read_bytes()


def test_main_entry_direct(tmp_path):
    # exercised in-process for coverage of the argparse wiring
    rc = main([
        "pressure",
        "--config", str(CONFIGS / "golden_mean.json"),
        "--out", str(tmp_path / "o"),
    ])
    assert rc == 0
    assert (tmp_path / "o" / "free_energy.csv").exists()
