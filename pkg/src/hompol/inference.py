"""Fisher information, Cramér-Rao bounds, calibration, and the angle estimator.

The per-trial Fisher information about the fast-axis angle theta, for the
three-outcome detection model with loss ``gamma``, visibility ``alpha`` and
wavepacket overlap ``g = exp(-dz^2/lc^2)``, is

    F = 16 alpha^2 g^2 (1-gamma)^2 (1+gamma) sin^2(2t) cos^2(2t)
        / [(1 - alpha g cos^2(2t)) (3 gamma + 1 + alpha g cos^2(2t) (1-gamma))]

(an overflow-free rearrangement of the usual form written with exp(+dz^2/lc^2);
the two agree identically). F vanishes at every multiple of pi/4, where the
visibility loses first-order sensitivity to the angle.

The maximum-likelihood estimate solves ``alpha cos^2(2t) = V`` with the
count-based visibility

    V = [N1 - N2 (1+3 gamma)/(1-gamma)] / (N1 + N2),

with two clamp rules when noise pushes V outside the solvable range: negative
V maps to pi/2, V/alpha > 1 maps to 0, each tagged with its own flag so that
downstream maps can mask those pixels. A single visibility cannot tell theta
from pi/2 - theta; the mirror solution is reported alongside the principal
value in [0, pi/4].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .detection import CountTriple, LossModel
from .hom import InterferometerConfig, overlap_probability

#: Upper clamp for calibrated loss; keeps 1/(1-gamma) finite.
GAMMA_MAX = 1.0 - 1e-9


class EstimateFlag(IntEnum):
    """Per-pixel estimate status; stored as small ints in flag maps."""

    OK = 0
    CLAMPED_LOW_V = 1       # negative visibility, estimate forced to pi/2
    CLAMPED_HIGH_V = 2      # V/alpha > 1, estimate forced to 0
    DEGENERATE_FISHER = 3   # estimate at a zero of F, CRB unbounded
    INVALID = 4             # no usable counts


@dataclass(frozen=True)
class AngleEstimate:
    """Fast-axis angle estimate with its mirror alternative and error bar.

    ``theta_hat`` is the principal-branch value; ``theta_alt = pi/2 - theta_hat``
    is the degenerate mirror solution. ``visibility`` is recorded unclamped.
    ``crb_std`` is ``sqrt(1/(N F))`` at the estimate, ``inf`` where F degenerates.
    """

    theta_hat: float
    theta_alt: float
    visibility: float
    crb_std: float
    flag: EstimateFlag
    n_trials: float


@dataclass(frozen=True)
class CalibrationResult:
    """Calibrated loss and maximum visibility; raw values kept for diagnostics."""

    gamma_hat: float
    gamma_raw: float
    alpha_hat: float = 1.0
    alpha_raw: float = 1.0

    @property
    def gamma_clamped(self) -> bool:
        return self.gamma_hat != self.gamma_raw

    @property
    def alpha_clamped(self) -> bool:
        return self.alpha_hat != self.alpha_raw


def _sin_cos_2theta(theta):
    """(sin 2t, cos 2t) with sin(4t) reduced so the product vanishes exactly
    at float multiples of pi/4."""
    theta = np.asarray(theta, dtype=float)
    x = 4.0 * theta
    k = np.round(x / np.pi)
    sin4 = np.sin(x - np.pi * k) * np.where(k % 2 == 0, 1.0, -1.0)
    cos2 = np.cos(2.0 * theta)
    return sin4, cos2


def _fisher(theta, gamma: float, alpha: float, g):
    """Per-trial Fisher information at overlap weight ``g``; vectorized."""
    sin4, cos2 = _sin_cos_2theta(theta)
    c2 = cos2 * cos2
    agc = alpha * np.asarray(g) * c2
    # 16 sin^2 cos^2 = 4 sin^2(4t); sin4 is exactly 0 on the pi/4 grid.
    num = 4.0 * alpha**2 * np.asarray(g) ** 2 * (1.0 - gamma) ** 2 * (1.0 + gamma) * sin4 * sin4
    den = (1.0 - agc) * (3.0 * gamma + 1.0 + agc * (1.0 - gamma))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), np.inf)
    return float(out) if out.ndim == 0 else out


def fisher_information(theta, loss: LossModel, cfg: InterferometerConfig, dz: float = 0.0):
    """Per-trial Fisher information about theta; scalar or array ``theta``.

    Returns ``inf`` where the denominator degenerates (only reachable in the
    alpha=1, gamma=0, dz=0, theta=0 corner).
    """
    g = overlap_probability(dz, cfg.lc)
    return _fisher(theta, loss.gamma, cfg.alpha, g)


def crb_variance(n_trials: float, fisher: float) -> float:
    """Cramér-Rao lower bound ``1/(N F)`` on the variance of theta estimates."""
    if n_trials <= 0:
        raise ValueError(f"n_trials must be positive, got {n_trials!r}")
    if not (fisher > 0.0):
        raise ValueError(f"degenerate bound: Fisher information must be > 0, got {fisher!r}")
    return 1.0 / (n_trials * fisher)


def estimate_gamma(baseline: CountTriple) -> CalibrationResult:
    """Loss calibration from a baseline frame at |dz| >> lc.

    ``gamma = (N1 - N2) / (N1 + 3 N2)``; the result is clamped into
    [0, 1 - 1e-9] and the raw ratio retained.
    """
    if baseline.n1 + baseline.n2 <= 0:
        raise ValueError("gamma calibration needs n1 + n2 > 0 in the baseline frame")
    raw = (baseline.n1 - baseline.n2) / (baseline.n1 + 3.0 * baseline.n2)
    return CalibrationResult(gamma_hat=min(max(raw, 0.0), GAMMA_MAX), gamma_raw=raw)


def calibrate(baseline: CountTriple, blank_dip: CountTriple | None = None) -> CalibrationResult:
    """Full calibration: gamma from the baseline frame, optionally alpha from
    a dip frame of a blank (no-sample, theta = 0) region where V = alpha."""
    cal = estimate_gamma(baseline)
    if blank_dip is None:
        return cal
    alpha_raw = visibility(blank_dip, cal.gamma_hat)
    alpha_hat = min(max(alpha_raw, 1e-6), 1.0)
    return CalibrationResult(cal.gamma_hat, cal.gamma_raw, alpha_hat, alpha_raw)


def visibility(dip: CountTriple, gamma: float) -> float:
    """Count-based visibility ``[N1 - N2 (1+3g)/(1-g)] / (N1 + N2)``.

    Not clamped: noise may push it outside [0, 1] and the estimator's case
    rules deal with that.
    """
    if dip.n1 + dip.n2 <= 0:
        raise ValueError("visibility needs n1 + n2 > 0 in the dip frame")
    if not (0.0 <= gamma < 1.0):
        raise ValueError(f"gamma must be in [0, 1), got {gamma!r}")
    return (dip.n1 - dip.n2 * (1.0 + 3.0 * gamma) / (1.0 - gamma)) / (dip.n1 + dip.n2)


def estimate_theta(dip: CountTriple, gamma: float, alpha: float) -> AngleEstimate:
    """Maximum-likelihood fast-axis angle from a dip frame (dz = 0).

    Solves ``alpha cos^2(2t) = V`` on the principal branch [0, pi/4]. Case
    rules, checked in this order: V < 0 returns pi/2 (CLAMPED_LOW_V);
    V/alpha > 1 returns 0 (CLAMPED_HIGH_V). The CRB error bar is evaluated at
    the estimate with the supplied gamma and alpha.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha!r}")
    v = visibility(dip, gamma)
    n = dip.total
    if v < 0.0:
        theta_hat = 0.5 * math.pi
        flag = EstimateFlag.CLAMPED_LOW_V
    elif v > alpha:
        theta_hat = 0.0
        flag = EstimateFlag.CLAMPED_HIGH_V
    else:
        theta_hat = 0.5 * math.acos(math.sqrt(v / alpha))
        flag = EstimateFlag.OK

    fisher = _fisher(theta_hat, gamma, alpha, 1.0)
    if np.isfinite(fisher) and fisher > 0.0:
        crb_std = math.sqrt(crb_variance(n, fisher))
    else:
        crb_std = math.inf
        if flag == EstimateFlag.OK:
            flag = EstimateFlag.DEGENERATE_FISHER
    return AngleEstimate(theta_hat=theta_hat, theta_alt=0.5 * math.pi - theta_hat,
                         visibility=v, crb_std=crb_std, flag=flag, n_trials=n)


def fisher_scan(theta_values, loss: LossModel, cfg: InterferometerConfig,
                dz: float = 0.0) -> np.ndarray:
    """Pointwise Fisher information; returns an (n, 2) array of (theta, F)."""
    theta_values = np.atleast_1d(np.asarray(theta_values, dtype=float))
    if theta_values.size == 0:
        raise ValueError("fisher_scan() needs a non-empty angle list")
    return np.column_stack([theta_values, fisher_information(theta_values, loss, cfg, dz)])
