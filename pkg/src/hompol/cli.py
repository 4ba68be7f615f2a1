"""Command-line pipeline: phantom generation, sweeps, scans, and reports.

Subcommands
-----------
phantom       write a phantom fixture file from the config
dip-sweep     simulated HOM dips vs delay at selected pixels, with dip fits
fisher-sweep  Fisher information / CRB / Monte Carlo variance vs angle
scan          two-frame raster scan: frames, estimate maps, manifest
report        plain-text summary and figures from a scan manifest

Every command is deterministic given config + seed; reruns overwrite
byte-identical CSV/JSON outputs. Exit codes: 0 success, 2 config error,
3 numerical or degenerate data, 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .detection import CountTriple
from .fileio import (MANIFEST_FORMAT, MANIFEST_VERSION, read_frame_csv, read_grid_csv,
                     read_manifest, write_curve_csv, write_frame_csv, write_grid_csv,
                     write_manifest)
from .inference import EstimateFlag, calibrate, fisher_information
from .montecarlo import RandomStream, TrialPlan, repeat_experiment
from .phantom import PhantomGrid, generate_shards, load_phantom, save_phantom
from .scan import ScanPlan, acquire_frame, build_maps, classical_reference, dip_position_study

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_FLAG_LEGEND = ",".join(f"{int(f)}={f.name}" for f in EstimateFlag)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="master seed (u64), overrides config")
    parser.add_argument("--out", type=str, default=None, help="output directory, overrides config")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (0 = auto); results independent of the value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hompol",
                                     description="HOM polarization microscopy toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate and save a phantom fixture")
    _add_common(p)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("dip-sweep", help="simulated dip curves and Gaussian-dip fits")
    _add_common(p)
    p.set_defaults(func=cmd_dip_sweep)

    p = sub.add_parser("fisher-sweep", help="Fisher information and Monte Carlo variance vs angle")
    _add_common(p)
    p.set_defaults(func=cmd_fisher_sweep)

    p = sub.add_parser("scan", help="raster scan: frames, maps, manifest")
    _add_common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("report", help="summarize a scan manifest")
    p.add_argument("manifest", type=str, help="path to a scan manifest JSON")
    p.add_argument("--out", type=str, default=None,
                   help="directory for report outputs (default: manifest directory)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_report)

    return parser


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    if not (0 <= cfg.seed < 2**64):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {cfg.seed!r}")
    if cfg.threads < 0:
        raise ConfigError(f"threads must be >= 0, got {cfg.threads!r}")
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _phantom_from_config(cfg: RunConfig) -> PhantomGrid:
    ps = cfg.phantom
    if ps.source == "file":
        if not ps.file:
            raise ConfigError("phantom.source is 'file' but phantom.file is not set")
        return load_phantom(ps.file)
    if ps.source != "generate":
        raise ConfigError(f"phantom.source must be 'generate' or 'file', got {ps.source!r}")
    if len(ps.angle_range_deg) != 2:
        raise ConfigError("phantom.angle_range_deg must be [low, high]")
    lo, hi = (math.radians(float(v)) for v in ps.angle_range_deg)
    return generate_shards(
        seed=cfg.seed, n_shards=int(ps.n_shards), size=(int(ps.width), int(ps.height)),
        angle_sampler=lambda rng: rng.uniform(lo, hi),
        pixel_pitch_um=float(ps.pixel_pitch_um), delta=float(ps.retardance_rad),
        layer_thickness_um=float(ps.layer_thickness_um),
        refractive_index=float(ps.refractive_index),
        gamma_background=float(ps.gamma_background),
        absorption_range=tuple(float(v) for v in ps.absorption_range),
        radius_range=tuple(float(v) for v in ps.radius_range))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_phantom(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(cfg)
    grid = _phantom_from_config(cfg)
    path = out / "phantom.json"
    save_phantom(grid, path)
    print(f"wrote {path} ({grid.width}x{grid.height}, {len(grid.shards)} shards)")
    return EXIT_OK


def cmd_dip_sweep(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(cfg)
    icfg = cfg.interferometer_config()
    setup_gamma = cfg.loss_model().gamma
    grid = _phantom_from_config(cfg)
    ds = cfg.dip_sweep
    dz = np.linspace(float(ds.dz_min_mm), float(ds.dz_max_mm), int(ds.n_points))
    pixels = [(int(p[0]), int(p[1])) for p in ds.pixels]
    plan = ScanPlan(trials_per_frame=int(ds.trials_per_point),
                    accidental_rate=float(cfg.montecarlo.accidental_rate))
    results = dip_position_study(grid, pixels, dz, plan, icfg, RandomStream(cfg.seed),
                                 base_gamma=setup_gamma)

    meta_base = {"master_seed": cfg.seed, "trials_per_point": int(ds.trials_per_point),
                 "lc_mm": icfg.lc, "alpha": icfg.alpha, "setup_gamma": setup_gamma}
    fit_rows = {k: [] for k in ("x", "y", "layer_count", "delay_shift_mm",
                                "fit_c0", "fit_c1", "fit_center_mm", "fit_width_mm", "fit_ok")}
    for res in results:
        tag = f"px{res.x:03d}_py{res.y:03d}"
        write_curve_csv(out / f"dip_model_{tag}.csv",
                        {"dz_mm": res.dz, "coincidence_probability": res.model},
                        meta={**meta_base, "pixel": f"{res.x},{res.y}", "kind": "model"})
        write_curve_csv(out / f"dip_obs_{tag}.csv",
                        {"dz_mm": res.dz, "coincidence_fraction": res.observed},
                        meta={**meta_base, "pixel": f"{res.x},{res.y}", "kind": "observed"})
        fit_rows["x"].append(res.x)
        fit_rows["y"].append(res.y)
        fit_rows["layer_count"].append(grid.layer_count(res.x, res.y))
        fit_rows["delay_shift_mm"].append(grid.pixel_delay_shift(res.x, res.y))
        fit_rows["fit_c0"].append(res.fit.c0)
        fit_rows["fit_c1"].append(res.fit.c1)
        fit_rows["fit_center_mm"].append(res.fit.center)
        fit_rows["fit_width_mm"].append(res.fit.width)
        fit_rows["fit_ok"].append(1.0 if res.fit.ok else 0.0)
    write_curve_csv(out / "dip_fits.csv", fit_rows, meta=meta_base)
    print(f"wrote {len(results)} dip curves and {out / 'dip_fits.csv'}")
    return EXIT_OK


def cmd_fisher_sweep(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(cfg)
    icfg = cfg.interferometer_config()
    loss = cfg.loss_model()
    fs = cfg.fisher_sweep
    thetas = np.radians(np.linspace(float(fs.theta_min_deg), float(fs.theta_max_deg),
                                    int(fs.n_points)))
    dz = float(fs.dz_mm)
    fisher = fisher_information(thetas, loss, icfg, dz)
    n_trials = int(fs.mc_trials)
    with np.errstate(divide="ignore"):
        crb = np.where(fisher > 0.0, 1.0 / (n_trials * np.where(fisher > 0.0, fisher, 1.0)),
                       np.inf)

    plan = TrialPlan(n_trials, accidental_rate=float(cfg.montecarlo.accidental_rate))
    repeats = int(fs.mc_repeats)
    stream = RandomStream(cfg.seed)
    mc_var = np.empty_like(thetas)
    for i, theta in enumerate(thetas):
        estimates = repeat_experiment(float(theta), loss, icfg, dz, plan, repeats,
                                      stream.offset(i * repeats))
        # the sweep angle is known, so pick the branch closest to it
        resolved = [est.theta_hat if abs(est.theta_hat - theta) <= abs(est.theta_alt - theta)
                    else est.theta_alt for est in estimates]
        mc_var[i] = float(np.var(resolved, ddof=1)) if repeats > 1 else math.nan
    write_curve_csv(out / "fisher_sweep.csv",
                    {"theta_rad": thetas, "fisher_per_trial": fisher,
                     "crb_variance_rad2": crb, "mc_variance_rad2": mc_var},
                    meta={"master_seed": cfg.seed, "dz_mm": dz, "gamma": loss.gamma,
                          "alpha": icfg.alpha, "lc_mm": icfg.lc,
                          "mc_trials": n_trials, "mc_repeats": repeats})
    print(f"wrote {out / 'fisher_sweep.csv'}")
    return EXIT_OK


def _region_counts(frame, region) -> CountTriple:
    x0, y0, w, h = region
    fx0, fy0, _, _ = frame.region
    sl = (slice(y0 - fy0, y0 - fy0 + h), slice(x0 - fx0, x0 - fx0 + w))
    return CountTriple(float(frame.n0[sl].sum()), float(frame.n1[sl].sum()),
                       float(frame.n2[sl].sum()))


def cmd_scan(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(cfg)
    icfg = cfg.interferometer_config()
    setup_gamma = cfg.loss_model().gamma
    grid = _phantom_from_config(cfg)
    plan = cfg.scan_plan()
    plan.validate(icfg)
    region = plan.resolve_region(grid)
    stream = RandomStream(cfg.seed)

    save_phantom(grid, out / "phantom.json")
    dip = acquire_frame(grid, plan.dip_dz, plan, icfg, stream.offset(0), cfg.threads,
                        base_gamma=setup_gamma)
    baseline = acquire_frame(grid, plan.baseline_dz, plan, icfg,
                             stream.offset(grid.npixels), cfg.threads,
                             base_gamma=setup_gamma)

    alpha_source = "config"
    alpha = cfg.scan_alpha()
    if cfg.scan.alpha_blank_region is not None:
        blank = tuple(int(v) for v in cfg.scan.alpha_blank_region)
        cal = calibrate(_region_counts(baseline, blank), _region_counts(dip, blank))
        alpha = cal.alpha_hat
        alpha_source = "blank_region"
    maps = build_maps(dip, baseline, alpha)

    x0, y0, w, h = region
    meta = {"master_seed": cfg.seed, "region": f"{x0},{y0},{w},{h}",
            "trials_per_frame": plan.trials_per_frame, "dip_dz_mm": plan.dip_dz,
            "baseline_dz_mm": plan.baseline_dz, "alpha": alpha, "setup_gamma": setup_gamma,
            "lc_mm": icfg.lc, "pixel_pitch_um": grid.pixel_pitch_um}

    write_frame_csv(out / "frame_dip.csv", dip, meta={"master_seed": cfg.seed})
    write_frame_csv(out / "frame_baseline.csv", baseline, meta={"master_seed": cfg.seed})

    crop = (slice(y0, y0 + h), slice(x0, x0 + w))
    map_files = {
        "gamma": ("map_gamma.csv", maps.gamma, {}),
        "visibility": ("map_visibility.csv", maps.visibility, {}),
        "theta": ("map_theta_rad.csv", maps.theta, {}),
        "theta_alt": ("map_theta_alt_rad.csv", maps.theta_alt, {}),
        "crb_std": ("map_crb_std_rad.csv", maps.crb_std, {}),
        "flags": ("map_flags.csv", maps.flags.astype(float), {"legend": _FLAG_LEGEND}),
    }
    manifest_maps = {}
    for key, (name, array, extra) in map_files.items():
        write_grid_csv(out / name, array, key, meta={**meta, **extra})
        manifest_maps[key] = name
    write_grid_csv(out / "map_classical.csv", classical_reference(grid)[crop],
                   "classical", meta=meta)
    write_grid_csv(out / "map_truth_theta_rad.csv", grid.effective_theta_map()[crop],
                   "truth_theta", meta=meta)
    truth_gamma = 1.0 - (1.0 - setup_gamma) * (1.0 - grid.gamma_map()[crop])
    write_grid_csv(out / "map_truth_gamma.csv", truth_gamma, "truth_gamma", meta=meta)

    embedded = cfg.to_dict()
    embedded.pop("threads", None)       # execution detail, keeps reruns byte-identical
    embedded.pop("output_dir", None)
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "master_seed": cfg.seed,
        "alpha": alpha,
        "alpha_source": alpha_source,
        "region": list(region),
        "trials_per_frame": plan.trials_per_frame,
        "grid": {"width": grid.width, "height": grid.height,
                 "pixel_pitch_um": grid.pixel_pitch_um},
        "config": embedded,
        "phantom_file": "phantom.json",
        "frames": {
            "dip": {"file": "frame_dip.csv", "dz_mm": plan.dip_dz},
            "baseline": {"file": "frame_baseline.csv", "dz_mm": plan.baseline_dz},
        },
        "maps": manifest_maps,
        "classical": "map_classical.csv",
        "truth": {"theta": "map_truth_theta_rad.csv", "gamma": "map_truth_gamma.csv"},
    }
    write_manifest(out / "manifest.json", manifest)
    print(f"wrote {out / 'manifest.json'}")
    return EXIT_OK


def _load_report_inputs(manifest_path: Path) -> dict:
    manifest = read_manifest(manifest_path)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"{manifest_path} is not a scan manifest "
                          f"(format={manifest.get('format')!r})")
    base = manifest_path.parent
    data = {"manifest": manifest}
    shapes = {}
    for key, name in manifest["maps"].items():
        array, _ = read_grid_csv(base / name)
        data[key] = array
        shapes[name] = array.shape
    classical, _ = read_grid_csv(base / manifest["classical"])
    data["classical"] = classical
    shapes[manifest["classical"]] = classical.shape
    truth = manifest.get("truth") or {}
    for key, name in truth.items():
        array, _ = read_grid_csv(base / name)
        data[f"truth_{key}"] = array
        shapes[name] = array.shape
    for key, entry in manifest.get("frames", {}).items():
        frame = read_frame_csv(base / entry["file"])
        data[f"frame_{key}"] = frame
        shapes[entry["file"]] = frame.n0.shape
    _, _, w, h = manifest["region"]
    for name, shape in shapes.items():
        if shape != (h, w):
            raise ValueError(f"mismatched frame dimensions: {name} is {shape[1]}x{shape[0]}, "
                             f"manifest region is {w}x{h}")
    return data


def cmd_report(args) -> int:
    manifest_path = Path(args.manifest)
    data = _load_report_inputs(manifest_path)
    manifest = data["manifest"]
    out = Path(args.out) if args.out else manifest_path.parent
    out.mkdir(parents=True, exist_ok=True)

    flags = data["flags"].astype(int)
    theta = data["theta"]
    ok_mask = flags == int(EstimateFlag.OK)
    lines = [
        f"scan report for {manifest_path.name}",
        f"region: {tuple(manifest['region'])}  pixels: {flags.size}",
        f"trials per frame: {manifest['trials_per_frame']}",
        f"alpha: {manifest['alpha']:.6g} ({manifest['alpha_source']})",
        "flag counts:",
    ]
    for flag in EstimateFlag:
        lines.append(f"  {flag.name}: {int(np.sum(flags == int(flag)))}")
    gamma = data["gamma"]
    lines.append(f"gamma map: mean={np.nanmean(gamma):.4f} "
                 f"min={np.nanmin(gamma):.4f} max={np.nanmax(gamma):.4f}")

    theta_err_deg = None
    if "truth_theta" in data:
        truth = data["truth_theta"]
        err = np.degrees(theta - truth)
        err[~ok_mask] = np.nan
        theta_err_deg = err
        rmse_all = float(np.sqrt(np.nanmean(err**2)))
        # pixels more than 3 deg away from every multiple of pi/4
        dist = np.degrees(np.abs(truth - (math.pi / 4) * np.round(truth / (math.pi / 4))))
        sel = ok_mask & (dist >= 3.0)
        rmse_sel = float(np.sqrt(np.nanmean(err[sel] ** 2))) if np.any(sel) else math.nan
        lines.append(f"theta RMSE vs truth (unflagged): {rmse_all:.4f} deg")
        lines.append(f"theta RMSE vs truth (unflagged, >3 deg from k*pi/4): {rmse_sel:.4f} deg")
        cos_quantum = np.cos(2.0 * theta) ** 2
        cos_err = np.where(ok_mask, cos_quantum - data["classical"], np.nan)
        lines.append(f"classical vs quantum cos^2(2 theta) RMS (unflagged): "
                     f"{float(np.sqrt(np.nanmean(cos_err**2))):.5f}")
    if "truth_gamma" in data:
        gerr = np.abs(gamma - data["truth_gamma"])
        lines.append(f"gamma mean abs error vs truth: {float(np.nanmean(gerr)):.5f}")

    figures = []
    if not args.no_figures:
        from .figures import render_scan_maps, render_theta_error

        maps_png = out / "report_maps.png"
        render_scan_maps({
            "classical": data["classical"],
            "theta_deg": np.degrees(theta),
            "visibility": data["visibility"],
            "gamma": gamma,
            "crb_deg": np.degrees(data["crb_std"]),
            "flags": flags,
        }, maps_png)
        figures.append(maps_png.name)
        if theta_err_deg is not None:
            err_png = out / "report_theta_error.png"
            render_theta_error(theta_err_deg, err_png)
            figures.append(err_png.name)
    if figures:
        lines.append("figures: " + ", ".join(figures))

    text = "\n".join(lines) + "\n"
    report_path = out / "report.txt"
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError) as exc:
        print(f"numerical/data error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
