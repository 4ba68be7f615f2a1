import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from hompol.cli import main
from hompol.config import ConfigError, RunConfig, dump_config, load_config
from hompol.fileio import read_curve_csv, read_grid_csv, read_manifest, write_grid_csv


BASE_CONFIG = {
    "seed": 424242,
    "threads": 1,
    "interferometer": {"coherence_length_mm": 1.0, "max_visibility": 0.95},
    "loss": {"gamma": 0.1},
    "phantom": {
        "source": "generate",
        "width": 8,
        "height": 8,
        "n_shards": 3,
        "angle_range_deg": [5.0, 40.0],
        "absorption_range": [0.0, 0.05],
        "gamma_background": 0.05,
    },
    "scan": {"trials_per_frame": 20000, "baseline_dz_mm": 5.0},
    "dip_sweep": {"pixels": [[0, 0], [4, 4]], "n_points": 15, "trials_per_point": 20000},
    "fisher_sweep": {"theta_min_deg": 0.0, "theta_max_deg": 90.0, "n_points": 13,
                     "mc_trials": 5000, "mc_repeats": 40},
}


def write_config(tmp_path, overrides=None, name="run.yaml"):
    data = json.loads(json.dumps(BASE_CONFIG))
    for key, value in (overrides or {}).items():
        section = data
        *parents, last = key.split(".")
        for p in parents:
            section = section.setdefault(p, {})
        section[last] = value
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def read_all_bytes(folder: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(folder.iterdir()) if p.is_file()}


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

def test_config_round_trip(tmp_path):
    path = write_config(tmp_path)
    cfg = load_config(path)
    text = dump_config(cfg)
    again = RunConfig.from_dict(yaml.safe_load(text))
    assert again.to_dict() == cfg.to_dict()
    assert dump_config(again) == text


def test_config_rejects_unknown_key(tmp_path):
    path = write_config(tmp_path, {"interferometer.coherence": 2.0})
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_rejects_bad_types(tmp_path):
    path = write_config(tmp_path, {"scan.trials_per_frame": "lots"})
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_defaults():
    cfg = RunConfig.from_dict({})
    assert cfg.interferometer_config().lc == 1.0
    assert cfg.scan_plan().baseline_dz == 5.0


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def test_phantom_command_deterministic(tmp_path):
    cfg_path = write_config(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["phantom", "--config", str(cfg_path), "--out", str(out_a)]) == 0
    assert main(["phantom", "--config", str(cfg_path), "--out", str(out_b)]) == 0
    assert (out_a / "phantom.json").read_bytes() == (out_b / "phantom.json").read_bytes()


def test_phantom_zero_shards(tmp_path):
    cfg_path = write_config(tmp_path, {"phantom.n_shards": 0})
    out = tmp_path / "empty"
    assert main(["phantom", "--config", str(cfg_path), "--out", str(out)]) == 0
    data = json.loads((out / "phantom.json").read_text())
    assert data["shards"] == []


def test_scan_outputs_and_manifest(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "scan"
    assert main(["scan", "--config", str(cfg_path), "--out", str(out)]) == 0
    manifest = read_manifest(out / "manifest.json")
    assert manifest["format"] == "hompol-scan-manifest"
    for name in ("frame_dip.csv", "frame_baseline.csv", "map_gamma.csv", "map_theta_rad.csv",
                 "map_visibility.csv", "map_crb_std_rad.csv", "map_flags.csv",
                 "map_classical.csv", "map_truth_theta_rad.csv", "map_truth_gamma.csv",
                 "phantom.json"):
        assert (out / name).exists(), name
    theta, meta = read_grid_csv(out / "map_theta_rad.csv")
    assert theta.shape == (8, 8)
    assert meta["map"] == "theta"


def test_scan_byte_identical_across_threads_and_reruns(tmp_path):
    cfg_path = write_config(tmp_path)
    outs = [tmp_path / f"run{i}" for i in range(3)]
    assert main(["scan", "--config", str(cfg_path), "--out", str(outs[0]), "--threads", "1"]) == 0
    assert main(["scan", "--config", str(cfg_path), "--out", str(outs[1]), "--threads", "4"]) == 0
    assert main(["scan", "--config", str(cfg_path), "--out", str(outs[2]), "--threads", "0"]) == 0
    ref = read_all_bytes(outs[0])
    for out in outs[1:]:
        assert read_all_bytes(out) == ref
    # rerun into the same directory overwrites byte-identically
    assert main(["scan", "--config", str(cfg_path), "--out", str(outs[0]), "--threads", "2"]) == 0
    assert read_all_bytes(outs[0]) == ref


def test_scan_seed_override_changes_counts(tmp_path):
    cfg_path = write_config(tmp_path)
    out_a, out_b = tmp_path / "s1", tmp_path / "s2"
    assert main(["scan", "--config", str(cfg_path), "--out", str(out_a)]) == 0
    assert main(["scan", "--config", str(cfg_path), "--out", str(out_b), "--seed", "7"]) == 0
    assert (out_a / "frame_dip.csv").read_bytes() != (out_b / "frame_dip.csv").read_bytes()


def test_dip_sweep_outputs(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "dips"
    assert main(["dip-sweep", "--config", str(cfg_path), "--out", str(out)]) == 0
    model, meta = read_curve_csv(out / "dip_model_px000_py000.csv")
    assert set(model) == {"dz_mm", "coincidence_probability"}
    assert len(model["dz_mm"]) == 15
    obs, _ = read_curve_csv(out / "dip_obs_px004_py004.csv")
    assert set(obs) == {"dz_mm", "coincidence_fraction"}
    fits, _ = read_curve_csv(out / "dip_fits.csv")
    assert len(fits["x"]) == 2


def test_fisher_sweep_outputs(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "fisher"
    assert main(["fisher-sweep", "--config", str(cfg_path), "--out", str(out)]) == 0
    data, meta = read_curve_csv(out / "fisher_sweep.csv")
    assert list(data) == ["theta_rad", "fisher_per_trial", "crb_variance_rad2",
                          "mc_variance_rad2"]
    fisher = data["fisher_per_trial"]
    thetas = data["theta_rad"]
    # zeros at multiples of pi/4 inside the sweep
    for k in range(3):
        idx = int(np.argmin(np.abs(thetas - k * np.pi / 4)))
        assert fisher[idx] == 0.0
    # Monte Carlo variance roughly tracks the CRB away from the zeros
    mask = (fisher > 1.0) & np.isfinite(data["mc_variance_rad2"])
    ratio = data["mc_variance_rad2"][mask] * 5000 * fisher[mask]
    assert np.median(ratio) == pytest.approx(1.0, abs=0.35)


def test_report_outputs(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "scan"
    assert main(["scan", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert main(["report", str(out / "manifest.json")]) == 0
    text = (out / "report.txt").read_text()
    assert "flag counts:" in text
    assert "theta RMSE vs truth" in text
    assert "gamma mean abs error" in text
    assert (out / "report_maps.png").exists()
    assert (out / "report_theta_error.png").exists()


def test_report_refuses_mismatched_dimensions(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "scan"
    assert main(["scan", "--config", str(cfg_path), "--out", str(out)]) == 0
    # truncate one map to break the declared region shape
    theta, _ = read_grid_csv(out / "map_theta_rad.csv")
    write_grid_csv(out / "map_theta_rad.csv", theta[:-1], "theta", meta={})
    assert main(["report", str(out / "manifest.json"), "--no-figures"]) == 3


def test_report_missing_manifest_is_io_error(tmp_path):
    assert main(["report", str(tmp_path / "nope.json")]) == 4


def test_bad_config_exit_code(tmp_path):
    path = write_config(tmp_path, {"loss.gamma": 1.5})
    out = tmp_path / "x"
    assert main(["scan", "--config", str(path), "--out", str(out)]) == 2
    path2 = write_config(tmp_path, {"phantom.source": "file"}, name="r2.yaml")
    assert main(["phantom", "--config", str(path2), "--out", str(out)]) == 2


def test_numerical_error_exit_code(tmp_path):
    # baseline too close to the dip violates the |dz| >= 3 lc contract
    path = write_config(tmp_path, {"scan.baseline_dz_mm": 1.0})
    assert main(["scan", "--config", str(path), "--out", str(tmp_path / "y")]) == 3


def test_console_entry_point(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "subproc"
    proc = subprocess.run([sys.executable, "-m", "hompol", "phantom",
                           "--config", str(cfg_path), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "phantom.json").exists()
