"""Raster-scan acquisition pipeline and map assembly.

Two frames are recorded per scan: a dip frame near dz = 0 and a baseline
frame at |dz| >> lc, both for the same number of trials per pixel. The
baseline calibrates the per-pixel loss; the dip frame gives the visibility
and the angle estimate. Per-pixel random streams are keyed by the global
pixel linear index (offset per frame), so acquisition order and thread count
cannot change the result.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import os

import numpy as np
from scipy.optimize import curve_fit

from .detection import CountTriple, LossModel, outcome_probabilities
from .hom import InterferometerConfig, coincidence_mixture
from .inference import EstimateFlag, calibrate, estimate_theta
from .montecarlo import RandomStream, TrialPlan, sample_counts
from .phantom import PhantomGrid


@dataclass(frozen=True)
class ScanPlan:
    """Two-frame acquisition plan over a rectangular region.

    ``region`` is (x0, y0, width, height) in pixels; None scans the whole
    grid. The baseline delay must satisfy |dz| >= 3 lc so the photons are
    distinguishable to machine precision there.
    """

    trials_per_frame: int
    dip_dz: float = 0.0
    baseline_dz: float = 5.0
    region: tuple[int, int, int, int] | None = None
    accidental_rate: float = 0.0

    def __post_init__(self):
        if self.trials_per_frame < 1:
            raise ValueError(f"trials_per_frame must be >= 1, got {self.trials_per_frame!r}")
        if not (0.0 <= self.accidental_rate < 1.0):
            raise ValueError(f"accidental_rate must be in [0, 1), got {self.accidental_rate!r}")

    def validate(self, cfg: InterferometerConfig) -> None:
        if abs(self.baseline_dz) < 3.0 * cfg.lc:
            raise ValueError(
                f"baseline delay {self.baseline_dz!r} mm is closer than 3*lc "
                f"({3.0 * cfg.lc} mm); photons would not be fully distinguishable")

    def resolve_region(self, grid: PhantomGrid) -> tuple[int, int, int, int]:
        region = self.region or (0, 0, grid.width, grid.height)
        x0, y0, w, h = region
        if w < 1 or h < 1 or x0 < 0 or y0 < 0 or x0 + w > grid.width or y0 + h > grid.height:
            raise ValueError(f"scan region {region!r} outside {grid.width}x{grid.height} grid")
        return region


@dataclass(frozen=True)
class ScanFrame:
    """Grid of count triples acquired at one delay setting.

    Count arrays are float so exact expected counts can stand in for samples.
    """

    dz: float
    trials: float
    region: tuple[int, int, int, int]
    n0: np.ndarray
    n1: np.ndarray
    n2: np.ndarray

    def counts(self, ix: int, iy: int) -> CountTriple:
        """Counts at region-relative pixel (ix, iy)."""
        return CountTriple(float(self.n0[iy, ix]), float(self.n1[iy, ix]),
                           float(self.n2[iy, ix]))


@dataclass(frozen=True)
class EstimateMap:
    """Per-pixel calibration, visibility, and angle maps over a scan region.

    Angle maps hold the principal value and the degenerate mirror value;
    ``visibility`` is unclamped; invalid pixels are NaN with flag INVALID.
    """

    region: tuple[int, int, int, int]
    alpha: float
    gamma: np.ndarray
    visibility: np.ndarray
    theta: np.ndarray
    theta_alt: np.ndarray
    crb_std: np.ndarray
    flags: np.ndarray


def pixel_loss(grid: PhantomGrid, x: int, y: int, base_gamma: float = 0.0) -> LossModel:
    """Total per-pixel loss: setup-level loss composed with the sample's
    local absorption, 1 - (1 - base)(1 - local)."""
    return LossModel(1.0 - (1.0 - base_gamma) * (1.0 - grid.gamma_local(x, y)))


def _frame_worker(grid, dz_setting, plan, cfg, stream, region, rows, n0, n1, n2, base_gamma):
    x0, y0, _, _ = region
    trial_plan = TrialPlan(plan.trials_per_frame, accidental_rate=plan.accidental_rate)
    for iy in rows:
        for ix in range(region[2]):
            x, y = x0 + ix, y0 + iy
            pixel_stream = stream.offset(y * grid.width + x)
            eff_dz = dz_setting - grid.pixel_delay_shift(x, y)
            pc = coincidence_mixture(grid.pixel_jones(x, y), eff_dz, cfg)
            probs = outcome_probabilities(pc, pixel_loss(grid, x, y, base_gamma))
            counts = sample_counts(probs, trial_plan, pixel_stream)
            n0[iy, ix], n1[iy, ix], n2[iy, ix] = counts.n0, counts.n1, counts.n2


def acquire_frame(grid: PhantomGrid, dz_setting: float, plan: ScanPlan,
                  cfg: InterferometerConfig, stream: RandomStream,
                  threads: int = 1, base_gamma: float = 0.0) -> ScanFrame:
    """Simulate one frame: per pixel, shift the delay by the stack thickness,
    evaluate the mixture coincidence with the pixel's Jones matrix and loss,
    and draw multinomial counts from the pixel's own stream.

    ``stream`` is the frame's base stream; pixel (x, y) draws from
    ``stream.offset(y * grid.width + x)``. ``threads = 0`` picks a worker
    count automatically; results are identical for any value. ``base_gamma``
    is a setup-level loss composed with the pixel absorption.
    """
    region = plan.resolve_region(grid)
    _, _, w, h = region
    n0 = np.zeros((h, w))
    n1 = np.zeros((h, w))
    n2 = np.zeros((h, w))
    if threads == 0:
        threads = min(os.cpu_count() or 1, h)
    if threads <= 1 or h == 1:
        _frame_worker(grid, dz_setting, plan, cfg, stream, region, range(h),
                      n0, n1, n2, base_gamma)
    else:
        chunks = np.array_split(np.arange(h), min(threads, h))
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            futures = [pool.submit(_frame_worker, grid, dz_setting, plan, cfg, stream,
                                   region, chunk, n0, n1, n2, base_gamma)
                       for chunk in chunks]
            for fut in futures:
                fut.result()
    return ScanFrame(dz=dz_setting, trials=plan.trials_per_frame, region=region,
                     n0=n0, n1=n1, n2=n2)


def expected_frame(grid: PhantomGrid, dz_setting: float, plan: ScanPlan,
                   cfg: InterferometerConfig, base_gamma: float = 0.0) -> ScanFrame:
    """Noise-free frame with exact expected counts N * p_i (infinite-N limit)."""
    region = plan.resolve_region(grid)
    x0, y0, w, h = region
    n = float(plan.trials_per_frame)
    n0 = np.zeros((h, w))
    n1 = np.zeros((h, w))
    n2 = np.zeros((h, w))
    for iy in range(h):
        for ix in range(w):
            x, y = x0 + ix, y0 + iy
            eff_dz = dz_setting - grid.pixel_delay_shift(x, y)
            pc = coincidence_mixture(grid.pixel_jones(x, y), eff_dz, cfg)
            probs = outcome_probabilities(pc, pixel_loss(grid, x, y, base_gamma))
            n0[iy, ix], n1[iy, ix], n2[iy, ix] = n * probs.p0, n * probs.p1, n * probs.p2
    return ScanFrame(dz=dz_setting, trials=n, region=region, n0=n0, n1=n1, n2=n2)


def build_maps(dip: ScanFrame, baseline: ScanFrame, alpha: float) -> EstimateMap:
    """Per-pixel estimation: gamma from the baseline frame, visibility and
    angle (with CRB error bar) from the dip frame using that pixel's gamma.

    Pixels without usable counts in either frame are flagged INVALID and
    excluded (NaN) from the value maps.
    """
    if dip.region != baseline.region:
        raise ValueError(f"frames are not aligned: dip region {dip.region}, "
                         f"baseline region {baseline.region}")
    _, _, w, h = dip.region
    gamma = np.full((h, w), np.nan)
    vis = np.full((h, w), np.nan)
    theta = np.full((h, w), np.nan)
    theta_alt = np.full((h, w), np.nan)
    crb = np.full((h, w), np.nan)
    flags = np.full((h, w), int(EstimateFlag.INVALID), dtype=np.int8)
    for iy in range(h):
        for ix in range(w):
            base = baseline.counts(ix, iy)
            dipc = dip.counts(ix, iy)
            if base.n1 + base.n2 <= 0 or dipc.n1 + dipc.n2 <= 0:
                continue
            cal = calibrate(base)
            est = estimate_theta(dipc, cal.gamma_hat, alpha)
            gamma[iy, ix] = cal.gamma_hat
            vis[iy, ix] = est.visibility
            theta[iy, ix] = est.theta_hat
            theta_alt[iy, ix] = est.theta_alt
            crb[iy, ix] = est.crb_std
            flags[iy, ix] = int(est.flag)
    return EstimateMap(region=dip.region, alpha=alpha, gamma=gamma, visibility=vis,
                       theta=theta, theta_alt=theta_alt, crb_std=crb, flags=flags)


def classical_reference(grid: PhantomGrid) -> np.ndarray:
    """Malus-law reference image ``I = I0 |<H|J|H>|^2`` with I0 = 1."""
    return grid.horizontal_intensity_map()


def run_scan(grid: PhantomGrid, plan: ScanPlan, cfg: InterferometerConfig,
             stream: RandomStream, alpha: float | None = None,
             threads: int = 1, base_gamma: float = 0.0) -> tuple[ScanFrame, ScanFrame, EstimateMap]:
    """Acquire the dip and baseline frames and assemble the estimate maps.

    The dip frame draws from stream indices [0, npixels) and the baseline
    from [npixels, 2 npixels). ``alpha`` defaults to the configured maximum
    visibility.
    """
    plan.validate(cfg)
    dip = acquire_frame(grid, plan.dip_dz, plan, cfg, stream.offset(0), threads, base_gamma)
    baseline = acquire_frame(grid, plan.baseline_dz, plan, cfg,
                             stream.offset(grid.npixels), threads, base_gamma)
    maps = build_maps(dip, baseline, cfg.alpha if alpha is None else alpha)
    return dip, baseline, maps


# ---------------------------------------------------------------------------
# Dip-position study: delay sweeps per pixel and Gaussian-dip fits
# ---------------------------------------------------------------------------

#: Fitted dips shallower than this fraction of the offset level are flagged flat.
FLAT_DIP_FRACTION = 0.02


@dataclass(frozen=True)
class DipFit:
    """Least-squares fit of c0 - c1 * exp(-(dz - center)^2 / width^2)."""

    c0: float
    c1: float
    center: float
    width: float
    ok: bool


@dataclass(frozen=True)
class DipStudyResult:
    x: int
    y: int
    dz: np.ndarray
    observed: np.ndarray    # coincidence fraction n2 / N per sweep point
    model: np.ndarray       # noise-free mixture coincidence probability
    fit: DipFit


def _gaussian_dip(dz, c0, c1, center, width):
    return c0 - c1 * np.exp(-((dz - center) ** 2) / width**2)


def fit_dip(dz: np.ndarray, observed: np.ndarray, lc: float) -> DipFit:
    """Gaussian-dip least squares with data-driven starting values.

    Flat curves (fitted depth below FLAT_DIP_FRACTION of the offset) and
    non-convergent fits come back with ok=False.
    """
    dz = np.asarray(dz, dtype=float)
    observed = np.asarray(observed, dtype=float)
    c0_guess = float(observed.max())
    c1_guess = max(float(observed.max() - observed.min()), 1e-6)
    center_guess = float(dz[int(np.argmin(observed))])
    p0 = [c0_guess, c1_guess, center_guess, lc]
    try:
        popt, _ = curve_fit(_gaussian_dip, dz, observed, p0=p0, maxfev=20000)
    except RuntimeError:
        nan = float("nan")
        return DipFit(nan, nan, nan, nan, ok=False)
    c0, c1, center, width = (float(v) for v in popt)
    ok = np.isfinite([c0, c1, center, width]).all() and c1 > FLAT_DIP_FRACTION * abs(c0)
    return DipFit(c0, c1, center, abs(width), ok=bool(ok))


def dip_position_study(grid: PhantomGrid, pixel_list, dz_sweep, plan: ScanPlan,
                       cfg: InterferometerConfig, stream: RandomStream,
                       base_gamma: float = 0.0) -> list[DipStudyResult]:
    """Simulated delay sweeps at selected pixels, with fitted dip centers.

    The fitted center tracks the pixel's stack delay shift. Sweep point j of
    pixel i draws from ``stream.offset(i * len(dz_sweep) + j)``.
    """
    dz_sweep = np.atleast_1d(np.asarray(dz_sweep, dtype=float))
    if dz_sweep.size == 0:
        raise ValueError("dip_position_study() needs a non-empty delay sweep")
    trial_plan = TrialPlan(plan.trials_per_frame, accidental_rate=plan.accidental_rate)
    results = []
    for i, (x, y) in enumerate(pixel_list):
        grid._check_bounds(x, y)
        jones = grid.pixel_jones(x, y)
        loss = pixel_loss(grid, x, y, base_gamma)
        shift = grid.pixel_delay_shift(x, y)
        observed = np.empty(dz_sweep.size)
        model = np.empty(dz_sweep.size)
        for j, dz in enumerate(dz_sweep):
            pc = coincidence_mixture(jones, dz - shift, cfg)
            model[j] = pc
            probs = outcome_probabilities(pc, loss)
            counts = sample_counts(probs, trial_plan, stream.offset(i * dz_sweep.size + j))
            observed[j] = counts.n2 / plan.trials_per_frame
        fit = fit_dip(dz_sweep, observed, cfg.lc)
        results.append(DipStudyResult(x=x, y=y, dz=dz_sweep.copy(), observed=observed,
                                      model=model, fit=fit))
    return results
