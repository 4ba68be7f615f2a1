"""Figure rendering for the report path (PNG files next to the CSV outputs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_scan_maps(maps: dict, out_path) -> None:
    """Panel figure of the scan products: classical reference, angle estimate,
    visibility, loss, CRB error bar, and flags."""
    panels = [
        ("classical", "Malus reference  I/I0", "gray", (0.0, 1.0)),
        ("theta_deg", "estimated axis angle  [deg]", "twilight", (0.0, 45.0)),
        ("visibility", "visibility V", "viridis", (0.0, 1.0)),
        ("gamma", "loss estimate", "magma", None),
        ("crb_deg", "CRB std  [deg]", "cividis", None),
        ("flags", "flags (0 OK)", "tab10", (0, 9)),
    ]
    fig, axes = plt.subplots(2, 3, figsize=(13, 7.5))
    for ax, (key, title, cmap, limits) in zip(axes.ravel(), panels):
        data = maps.get(key)
        if data is None:
            ax.set_axis_off()
            continue
        kwargs = {}
        if limits is not None:
            kwargs = {"vmin": limits[0], "vmax": limits[1]}
        im = ax.imshow(data, origin="upper", interpolation="nearest", cmap=cmap, **kwargs)
        ax.set_title(title, fontsize=10)
        ax.set_xlabel("x [px]", fontsize=8)
        ax.set_ylabel("y [px]", fontsize=8)
        ax.tick_params(labelsize=7)
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def render_theta_error(error_deg: np.ndarray, out_path) -> None:
    """Histogram of per-pixel angle errors against phantom truth."""
    error_deg = error_deg[np.isfinite(error_deg)]
    fig, ax = plt.subplots(figsize=(6, 4))
    if error_deg.size:
        ax.hist(error_deg, bins=40, color="steelblue", edgecolor="black", linewidth=0.3)
        ax.axvline(0.0, color="firebrick", linestyle="--", linewidth=1)
    ax.set_xlabel("estimate - truth  [deg]")
    ax.set_ylabel("pixels")
    ax.set_title("angle error (unflagged pixels)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)


def render_dip_curves(curves: list[dict], out_path) -> None:
    """Observed and fitted HOM dips for the studied pixels."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for entry in curves:
        label = f"({entry['x']}, {entry['y']})"
        line, = ax.plot(entry["dz"], entry["observed"], "o", markersize=3, label=label)
        if entry.get("fit") is not None:
            dz = np.linspace(entry["dz"].min(), entry["dz"].max(), 400)
            c0, c1, center, width = entry["fit"]
            ax.plot(dz, c0 - c1 * np.exp(-((dz - center) ** 2) / width**2),
                    "-", color=line.get_color(), linewidth=1)
    ax.set_xlabel("delay dz [mm]")
    ax.set_ylabel("coincidence fraction")
    ax.legend(fontsize=8, title="pixel")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
