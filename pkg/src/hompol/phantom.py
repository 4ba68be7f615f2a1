"""Synthetic birefringent phantoms: stacked retarder-film shards on a grid.

A phantom is a pixel grid covered by convex polygonal shards, each a linear
retarder with its own fast-axis angle, retardance (default a half-wave), and
absorption. A pixel's Jones matrix is the composition of the covering shards
in stacking order; its loss composes as ``1 - prod(1 - gamma_k)`` including a
uniform background term. Each layer adds a path delay
``thickness * (refractive_index - 1)`` to the signal photon.

Shard vertices live in pixel coordinates; a pixel belongs to a shard when its
center (x + 0.5, y + 0.5) falls inside the polygon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .jones import compose, effective_angle, horizontal_intensity, retarder

PHANTOM_FORMAT = "hompol-phantom"
PHANTOM_VERSION = 1

_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class Shard:
    """Convex polygonal retarder shard with uniform interior properties."""

    vertices: np.ndarray        # (k, 2) float, pixel coordinates, CCW
    theta: float                # fast-axis angle, radians
    delta: float = math.pi      # retardance, radians
    absorption: float = 0.0     # per-shard photon loss contribution

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 2:
            raise ValueError(f"shard needs at least 3 (x, y) vertices, got shape {verts.shape}")
        if not (0.0 <= self.absorption < 1.0):
            raise ValueError(f"shard absorption must be in [0, 1), got {self.absorption!r}")
        object.__setattr__(self, "vertices", verts)

    def jones(self) -> np.ndarray:
        return retarder(self.theta, self.delta)


@dataclass(frozen=True)
class PixelTruth:
    """Ground-truth optical properties at one scan position.

    ``theta`` is the covering shard's axis for single-layer pixels, 0 for
    uncovered ones, and the effective principal angle for stacks (a stack has
    no single fast axis). ``delta`` follows the same rule and is NaN for
    stacks of mixed retardance.
    """

    theta: float
    delta: float
    layer_count: int
    layer_thickness_um: float
    refractive_index: float
    gamma_local: float

    @property
    def delay_shift_mm(self) -> float:
        return self.layer_count * self.layer_thickness_um * (self.refractive_index - 1.0) * 1e-3


def _inside(shard: Shard, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Vectorized point-in-convex-polygon test (CCW vertices, inclusive edges)."""
    verts = shard.vertices
    inside = np.ones(px.shape, dtype=bool)
    for i in range(len(verts)):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % len(verts)]
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        inside &= cross >= -_EDGE_TOL
    return inside


class PhantomGrid:
    """Immutable grid of ground-truth pixels built from a shard list.

    Optional per-pixel overrides replace a pixel's element with an explicit
    single retarder: a dict keyed by (x, y) with entries
    ``theta_rad`` (required), ``delta_rad``, ``absorption``, ``layer_count``.
    """

    def __init__(self, width: int, height: int, shards: list[Shard],
                 pixel_pitch_um: float = 60.0, layer_thickness_um: float = 60.0,
                 refractive_index: float = 1.5, gamma_background: float = 0.0,
                 overrides: dict[tuple[int, int], dict] | None = None):
        if width < 1 or height < 1:
            raise ValueError(f"grid size must be positive, got {width}x{height}")
        if not (0.0 <= gamma_background < 1.0):
            raise ValueError(f"background absorption must be in [0, 1), got {gamma_background!r}")
        self.width = int(width)
        self.height = int(height)
        self.pixel_pitch_um = float(pixel_pitch_um)
        self.layer_thickness_um = float(layer_thickness_um)
        self.refractive_index = float(refractive_index)
        self.gamma_background = float(gamma_background)
        self.shards = list(shards)
        self.overrides = dict(overrides or {})
        for (x, y), entry in self.overrides.items():
            self._check_bounds(x, y)
            if "theta_rad" not in entry:
                raise ValueError(f"pixel override at ({x}, {y}) needs theta_rad")

        ys, xs = np.mgrid[0:self.height, 0:self.width]
        px, py = xs + 0.5, ys + 0.5
        self._masks = np.array([_inside(s, px, py) for s in self.shards], dtype=bool) \
            if self.shards else np.zeros((0, self.height, self.width), dtype=bool)

    @property
    def npixels(self) -> int:
        return self.width * self.height

    def _check_bounds(self, x: int, y: int) -> None:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise ValueError(f"pixel ({x}, {y}) outside {self.width}x{self.height} grid")

    def covering(self, x: int, y: int) -> list[int]:
        """Indices of shards covering pixel (x, y), in stacking order."""
        self._check_bounds(x, y)
        return [i for i in range(len(self.shards)) if self._masks[i, y, x]]

    def layer_count(self, x: int, y: int) -> int:
        entry = self.overrides.get((x, y))
        if entry is not None:
            return int(entry.get("layer_count", 1))
        return len(self.covering(x, y))

    def layer_count_map(self) -> np.ndarray:
        counts = self._masks.sum(axis=0).astype(int)
        for (x, y), entry in self.overrides.items():
            counts[y, x] = int(entry.get("layer_count", 1))
        return counts

    def pixel_jones(self, x: int, y: int) -> np.ndarray:
        """Composition of covering shard matrices in stacking order."""
        self._check_bounds(x, y)
        entry = self.overrides.get((x, y))
        if entry is not None:
            return retarder(entry["theta_rad"], entry.get("delta_rad", math.pi))
        idx = self.covering(x, y)
        if not idx:
            return np.eye(2, dtype=complex)
        return compose([self.shards[i].jones() for i in idx])

    def pixel_delay_shift(self, x: int, y: int) -> float:
        """Path delay of the stack, millimeters: layers * d * (n - 1)."""
        self._check_bounds(x, y)
        return self.layer_count(x, y) * self.layer_thickness_um \
            * (self.refractive_index - 1.0) * 1e-3

    def gamma_local(self, x: int, y: int) -> float:
        self._check_bounds(x, y)
        entry = self.overrides.get((x, y))
        if entry is not None and "absorption" in entry:
            return float(entry["absorption"])
        survive = 1.0 - self.gamma_background
        for i in self.covering(x, y):
            survive *= 1.0 - self.shards[i].absorption
        return 1.0 - survive

    def gamma_map(self) -> np.ndarray:
        out = np.empty((self.height, self.width))
        for y in range(self.height):
            for x in range(self.width):
                out[y, x] = self.gamma_local(x, y)
        return out

    def pixel_truth(self, x: int, y: int) -> PixelTruth:
        self._check_bounds(x, y)
        entry = self.overrides.get((x, y))
        if entry is not None:
            theta = float(entry["theta_rad"])
            delta = float(entry.get("delta_rad", math.pi))
            layers = int(entry.get("layer_count", 1))
        else:
            idx = self.covering(x, y)
            layers = len(idx)
            if layers == 0:
                theta, delta = 0.0, 0.0
            elif layers == 1:
                theta, delta = self.shards[idx[0]].theta, self.shards[idx[0]].delta
            else:
                theta = self.effective_theta(x, y)
                deltas = {self.shards[i].delta for i in idx}
                delta = deltas.pop() if len(deltas) == 1 else math.nan
        return PixelTruth(theta=theta, delta=delta, layer_count=layers,
                          layer_thickness_um=self.layer_thickness_um,
                          refractive_index=self.refractive_index,
                          gamma_local=self.gamma_local(x, y))

    def effective_theta(self, x: int, y: int) -> float:
        """Effective measured angle of the pixel's stack, principal branch."""
        return effective_angle(self.pixel_jones(x, y))

    def effective_theta_map(self) -> np.ndarray:
        out = np.empty((self.height, self.width))
        for y in range(self.height):
            for x in range(self.width):
                out[y, x] = self.effective_theta(x, y)
        return out

    def horizontal_intensity_map(self) -> np.ndarray:
        """Per-pixel ``|<H|J|H>|^2`` (the Malus-law classical reference)."""
        out = np.empty((self.height, self.width))
        for y in range(self.height):
            for x in range(self.width):
                out[y, x] = horizontal_intensity(self.pixel_jones(x, y))
        return out

    def to_dict(self) -> dict:
        return {
            "format": PHANTOM_FORMAT,
            "version": PHANTOM_VERSION,
            "width": self.width,
            "height": self.height,
            "pixel_pitch_um": self.pixel_pitch_um,
            "layer_thickness_um": self.layer_thickness_um,
            "refractive_index": self.refractive_index,
            "gamma_background": self.gamma_background,
            "shards": [
                {
                    "theta_rad": s.theta,
                    "delta_rad": s.delta,
                    "absorption": s.absorption,
                    "vertices": [[float(vx), float(vy)] for vx, vy in s.vertices],
                }
                for s in self.shards
            ],
            "pixel_overrides": [
                {"x": x, "y": y, **entry} for (x, y), entry in sorted(self.overrides.items())
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PhantomGrid":
        if data.get("format") != PHANTOM_FORMAT:
            raise ValueError(f"not a phantom file (format={data.get('format')!r})")
        if data.get("version") != PHANTOM_VERSION:
            raise ValueError(f"unsupported phantom version {data.get('version')!r}")
        shards = [
            Shard(vertices=np.asarray(s["vertices"], dtype=float),
                  theta=float(s["theta_rad"]), delta=float(s.get("delta_rad", math.pi)),
                  absorption=float(s.get("absorption", 0.0)))
            for s in data.get("shards", [])
        ]
        overrides = {}
        for entry in data.get("pixel_overrides", []):
            entry = dict(entry)
            x, y = int(entry.pop("x")), int(entry.pop("y"))
            overrides[(x, y)] = entry
        return cls(width=int(data["width"]), height=int(data["height"]), shards=shards,
                   pixel_pitch_um=float(data.get("pixel_pitch_um", 60.0)),
                   layer_thickness_um=float(data.get("layer_thickness_um", 60.0)),
                   refractive_index=float(data.get("refractive_index", 1.5)),
                   gamma_background=float(data.get("gamma_background", 0.0)),
                   overrides=overrides)


def generate_shards(seed: int, n_shards: int, size: tuple[int, int],
                    angle_sampler=None, *, pixel_pitch_um: float = 60.0,
                    delta: float = math.pi, layer_thickness_um: float = 60.0,
                    refractive_index: float = 1.5, gamma_background: float = 0.0,
                    absorption_range: tuple[float, float] = (0.0, 0.0),
                    radius_range: tuple[float, float] = (0.15, 0.45)) -> PhantomGrid:
    """Random phantom: convex shards with uniform per-shard fast-axis angles.

    Each shard is the convex hull of points drawn in a disc whose radius is a
    ``radius_range`` fraction of the smaller grid dimension. ``angle_sampler``
    is a callable rng -> radians (default uniform on [0, pi/2)); per-shard
    absorption is drawn uniformly from ``absorption_range``.
    """
    if n_shards < 0:
        raise ValueError(f"n_shards must be >= 0, got {n_shards!r}")
    width, height = size
    rng = np.random.default_rng(seed)
    scale = min(width, height)
    shards = []
    while len(shards) < n_shards:
        center = rng.uniform((0.0, 0.0), (width, height))
        radius = rng.uniform(*radius_range) * scale
        angles = rng.uniform(0.0, 2.0 * math.pi, size=8)
        radii = radius * np.sqrt(rng.uniform(0.2, 1.0, size=8))
        pts = center + np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        try:
            hull = ConvexHull(pts)
        except QhullError:
            continue
        theta = float(angle_sampler(rng)) if angle_sampler is not None \
            else float(rng.uniform(0.0, math.pi / 2.0))
        absorption = float(rng.uniform(*absorption_range))
        shards.append(Shard(vertices=pts[hull.vertices], theta=theta, delta=delta,
                            absorption=absorption))
    return PhantomGrid(width=width, height=height, shards=shards,
                       pixel_pitch_um=pixel_pitch_um,
                       layer_thickness_um=layer_thickness_um,
                       refractive_index=refractive_index,
                       gamma_background=gamma_background)


def save_phantom(grid: PhantomGrid, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(grid.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_phantom(path) -> PhantomGrid:
    with open(path, "r", encoding="utf-8") as fh:
        return PhantomGrid.from_dict(json.load(fh))
