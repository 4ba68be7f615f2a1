"""Lossy three-outcome detection model and the multinomial log-likelihood.

Each pair-generation event ends in one of three mutually exclusive outcomes:
no click on either detector (0), a click on exactly one detector (1), or
simultaneous clicks (2). With a per-photon loss probability ``gamma`` applied
independently to both photons, the outcome probabilities follow from the
coincidence probability ``pc``:

    p0 = gamma^2
    p1 = 2 gamma (1 - gamma) pc + (1 - gamma^2) (1 - pc)
    p2 = (1 - gamma)^2 pc

``1 - pc`` is the probability of a bunching event; a surviving bunched pair
hits a single detector and counts as a single click.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hom import InterferometerConfig, coincidence_probability


@dataclass(frozen=True)
class LossModel:
    """Per-photon loss probability ``gamma`` in [0, 1)."""

    gamma: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"loss probability must be in [0, 1), got {self.gamma!r}")


@dataclass(frozen=True)
class CountTriple:
    """Counts of (no-click, single-click, coincidence) events for one frame.

    Floats are accepted so that exact expected counts (infinite-N limits) can
    flow through the same estimators as sampled integer counts.
    """

    n0: float
    n1: float
    n2: float

    def __post_init__(self):
        for name, v in (("n0", self.n0), ("n1", self.n1), ("n2", self.n2)):
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"count {name} must be finite and >= 0, got {v!r}")

    @property
    def total(self) -> float:
        return self.n0 + self.n1 + self.n2


@dataclass(frozen=True)
class OutcomeProbabilities:
    """Probabilities of the three detection outcomes; fields may be arrays."""

    p0: float | np.ndarray
    p1: float | np.ndarray
    p2: float | np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.p0, self.p1, self.p2))


def outcome_probabilities(pc, loss: LossModel) -> OutcomeProbabilities:
    """Map coincidence probability to the three-outcome distribution.

    ``pc`` may be a scalar or array; probabilities sum to 1 elementwise.
    """
    pc = np.asarray(pc, dtype=float)
    if np.any(pc < 0.0) or np.any(pc > 1.0):
        raise ValueError("coincidence probability must lie in [0, 1]")
    g = loss.gamma
    p0 = np.full_like(pc, g * g)
    p1 = 2.0 * g * (1.0 - g) * pc + (1.0 - g * g) * (1.0 - pc)
    p2 = (1.0 - g) ** 2 * pc
    if pc.ndim == 0:
        return OutcomeProbabilities(float(p0), float(p1), float(p2))
    return OutcomeProbabilities(p0, p1, p2)


def log_likelihood(counts: CountTriple, theta, loss: LossModel,
                   cfg: InterferometerConfig, dz: float = 0.0):
    """Multinomial log-likelihood ``sum_i N_i ln P(i|theta)`` of a count triple.

    The multinomial coefficient is omitted (constant in theta). Outcomes with
    zero counts contribute nothing; an observed outcome with zero model
    probability yields ``-inf``. ``theta`` may be an array, in which case an
    array of log-likelihood values is returned (handy for grid searches).
    """
    pc = coincidence_probability(theta, dz, cfg)
    probs = outcome_probabilities(pc, loss)
    total = np.zeros_like(np.asarray(pc, dtype=float))
    for n, p in ((counts.n0, probs.p0), (counts.n1, probs.p1), (counts.n2, probs.p2)):
        if n == 0:
            continue
        p = np.asarray(p, dtype=float)
        with np.errstate(divide="ignore"):
            term = np.where(p > 0.0, n * np.log(np.where(p > 0.0, p, 1.0)), -np.inf)
        total = total + term
    return float(total) if total.ndim == 0 else total
