"""Declarative run configuration (YAML, nested sections).

A config file plus a master seed fully determines a run. Unknown keys are
rejected so typos fail loudly; every key has a default, documented in the
README schema. ``to_dict``/``from_dict`` round-trip exactly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import yaml

from .hom import DEFAULT_SPLITTER, InterferometerConfig
from .detection import LossModel
from .scan import ScanPlan


class ConfigError(ValueError):
    """Bad or inconsistent run configuration."""


@dataclass
class InterferometerSection:
    coherence_length_mm: float = 1.0
    max_visibility: float = 1.0
    splitter_t: list = field(default_factory=lambda: [DEFAULT_SPLITTER[0].real, 0.0])
    splitter_r: list = field(default_factory=lambda: [0.0, DEFAULT_SPLITTER[1].imag])


@dataclass
class LossSection:
    gamma: float = 0.0


@dataclass
class PhantomSection:
    source: str = "generate"            # "generate" or "file"
    file: str | None = None
    width: int = 32
    height: int = 32
    pixel_pitch_um: float = 60.0
    n_shards: int = 6
    angle_range_deg: list = field(default_factory=lambda: [0.0, 90.0])
    absorption_range: list = field(default_factory=lambda: [0.0, 0.0])
    gamma_background: float = 0.0
    retardance_rad: float = math.pi
    layer_thickness_um: float = 60.0
    refractive_index: float = 1.5
    radius_range: list = field(default_factory=lambda: [0.15, 0.45])


@dataclass
class ScanSection:
    dip_dz_mm: float = 0.0
    baseline_dz_mm: float = 5.0
    trials_per_frame: int = 100000
    region: list | None = None          # [x0, y0, width, height] or null
    alpha: float | None = None          # null -> interferometer max_visibility
    alpha_blank_region: list | None = None


@dataclass
class DipSweepSection:
    pixels: list = field(default_factory=lambda: [[0, 0]])
    dz_min_mm: float = -2.5
    dz_max_mm: float = 2.5
    n_points: int = 41
    trials_per_point: int = 100000


@dataclass
class FisherSweepSection:
    theta_min_deg: float = 0.0
    theta_max_deg: float = 90.0
    n_points: int = 91
    dz_mm: float = 0.0
    mc_trials: int = 100000
    mc_repeats: int = 200


@dataclass
class MonteCarloSection:
    accidental_rate: float = 0.0


@dataclass
class RunConfig:
    seed: int = 1
    output_dir: str = "out"
    threads: int = 0
    interferometer: InterferometerSection = field(default_factory=InterferometerSection)
    loss: LossSection = field(default_factory=LossSection)
    phantom: PhantomSection = field(default_factory=PhantomSection)
    scan: ScanSection = field(default_factory=ScanSection)
    dip_sweep: DipSweepSection = field(default_factory=DipSweepSection)
    fisher_sweep: FisherSweepSection = field(default_factory=FisherSweepSection)
    montecarlo: MonteCarloSection = field(default_factory=MonteCarloSection)

    # -- domain-object builders -------------------------------------------

    def interferometer_config(self) -> InterferometerConfig:
        sec = self.interferometer
        try:
            return InterferometerConfig(
                lc=float(sec.coherence_length_mm),
                alpha=float(sec.max_visibility),
                t=complex(sec.splitter_t[0], sec.splitter_t[1]),
                r=complex(sec.splitter_r[0], sec.splitter_r[1]),
            )
        except (ValueError, IndexError, TypeError) as exc:
            raise ConfigError(f"bad interferometer section: {exc}") from exc

    def loss_model(self) -> LossModel:
        try:
            return LossModel(float(self.loss.gamma))
        except ValueError as exc:
            raise ConfigError(f"bad loss section: {exc}") from exc

    def scan_plan(self) -> ScanPlan:
        sec = self.scan
        region = tuple(int(v) for v in sec.region) if sec.region is not None else None
        try:
            return ScanPlan(trials_per_frame=int(sec.trials_per_frame),
                            dip_dz=float(sec.dip_dz_mm),
                            baseline_dz=float(sec.baseline_dz_mm),
                            region=region,
                            accidental_rate=float(self.montecarlo.accidental_rate))
        except ValueError as exc:
            raise ConfigError(f"bad scan section: {exc}") from exc

    def scan_alpha(self) -> float:
        if self.scan.alpha is not None:
            return float(self.scan.alpha)
        return float(self.interferometer.max_visibility)

    # -- dict / file round trip --------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        cfg = cls()
        _apply(cfg, data or {}, path="")
        return cfg


def _apply(obj, data: dict, path: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"section '{path or '<root>'}' must be a mapping, got {type(data).__name__}")
    valid = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in data.items():
        here = f"{path}.{key}" if path else key
        if key not in valid:
            raise ConfigError(f"unknown config key '{here}'")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            _apply(current, value, here)
        else:
            setattr(obj, key, _coerce(current, value, here))


def _coerce(current, value, path: str):
    if value is None:
        return None
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"config key '{path}' must be a boolean")
        return value
    if isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"config key '{path}' must be an integer, got {value!r}")
        return int(value)
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key '{path}' must be a number, got {value!r}")
        return float(value)
    if isinstance(current, str) or current is None:
        if current is None and isinstance(value, (list, int, float)):
            return value        # optional fields (region lists, alpha, file)
        if not isinstance(value, str):
            raise ConfigError(f"config key '{path}' must be a string, got {value!r}")
        return value
    if isinstance(current, list):
        if not isinstance(value, list):
            raise ConfigError(f"config key '{path}' must be a list, got {value!r}")
        return value
    raise ConfigError(f"config key '{path}' has unsupported type")


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return RunConfig.from_dict(data or {})


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)
