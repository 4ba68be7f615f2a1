"""Delimited outputs: CSV grids, count frames, curves, and the JSON manifest.

All CSV files use '.' decimal separator, UTF-8, LF line endings, and '#'
metadata header lines; floats are written with %.17g so reruns are
byte-identical. Nothing time- or host-dependent is ever written.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"

MANIFEST_FORMAT = "hompol-scan-manifest"
MANIFEST_VERSION = 1


def _format_value(v) -> str:
    if isinstance(v, float):
        return FLOAT_FMT % v
    return str(v)


def write_grid_csv(path, array: np.ndarray, name: str, meta: dict | None = None) -> None:
    """Row-major grid CSV: '#' header with name/dimensions/metadata, then one
    comma-separated row of values per grid row."""
    array = np.asarray(array)
    lines = [f"# map: {name}", f"# width: {array.shape[1]}", f"# height: {array.shape[0]}"]
    for key, value in (meta or {}).items():
        lines.append(f"# {key}: {_format_value(value)}")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
        np.savetxt(fh, array, fmt=FLOAT_FMT, delimiter=",", newline="\n")


def read_grid_csv(path) -> tuple[np.ndarray, dict]:
    meta = {}
    with open(path, "r", encoding="utf-8") as fh:
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if ":" in line:
                    key, _, value = line[1:].partition(":")
                    meta[key.strip()] = value.strip()
                continue
            rows.append([float(v) for v in line.split(",")])
    return np.asarray(rows), meta


def write_frame_csv(path, frame, meta: dict | None = None) -> None:
    """Count frame CSV with columns x, y, n0, n1, n2 (region coordinates)."""
    x0, y0, w, h = frame.region
    lines = [
        "# frame: counts",
        f"# region: {x0},{y0},{w},{h}",
        f"# dz_mm: {_format_value(float(frame.dz))}",
        f"# trials: {_format_value(float(frame.trials))}",
    ]
    for key, value in (meta or {}).items():
        lines.append(f"# {key}: {_format_value(value)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
        fh.write("x,y,n0,n1,n2\n")
        for iy in range(h):
            for ix in range(w):
                vals = ",".join(FLOAT_FMT % v for v in
                                (frame.n0[iy, ix], frame.n1[iy, ix], frame.n2[iy, ix]))
                fh.write(f"{x0 + ix},{y0 + iy},{vals}\n")


def read_frame_csv(path):
    """Read a frame CSV back into (region, dz, trials, n0, n1, n2)."""
    from .scan import ScanFrame

    meta = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("x,"):
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
                continue
            rows.append([float(v) for v in line.split(",")])
    x0, y0, w, h = (int(v) for v in meta["region"].split(","))
    n0 = np.zeros((h, w))
    n1 = np.zeros((h, w))
    n2 = np.zeros((h, w))
    for x, y, a, b, c in rows:
        ix, iy = int(x) - x0, int(y) - y0
        n0[iy, ix], n1[iy, ix], n2[iy, ix] = a, b, c
    return ScanFrame(dz=float(meta["dz_mm"]), trials=float(meta["trials"]),
                     region=(x0, y0, w, h), n0=n0, n1=n1, n2=n2)


def write_curve_csv(path, columns: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Generic column CSV: '#' metadata, one header row, aligned columns."""
    names = list(columns)
    arrays = [np.asarray(columns[k], dtype=float) for k in names]
    lines = [f"# {key}: {_format_value(value)}" for key, value in (meta or {}).items()]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if lines:
            fh.write("\n".join(lines) + "\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*arrays):
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def read_curve_csv(path) -> tuple[dict[str, np.ndarray], dict]:
    meta = {}
    names = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
                continue
            if names is None:
                names = line.split(",")
                continue
            rows.append([float(v) for v in line.split(",")])
    data = np.asarray(rows) if rows else np.zeros((0, len(names or [])))
    return {name: data[:, i] for i, name in enumerate(names or [])}, meta


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
