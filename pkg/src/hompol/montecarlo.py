"""Reproducible multinomial sampling of detection outcomes.

Randomness is organized as counter-based streams keyed by
``(master_seed, stream_index)`` through the Philox bit generator, so every
pixel / repeat owns an independent stream and results do not depend on
visitation order or thread count. The same key always reproduces the same
sample sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detection import CountTriple, LossModel, OutcomeProbabilities, outcome_probabilities
from .hom import InterferometerConfig, coincidence_probability
from .inference import AngleEstimate, estimate_theta

_U64 = 2**64


@dataclass(frozen=True)
class RandomStream:
    """Keyed random stream: identical (master_seed, stream_index) gives an
    identical sample sequence on every platform."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name, v in (("master_seed", self.master_seed), ("stream_index", self.stream_index)):
            if not (0 <= v < _U64):
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.master_seed, self.stream_index]))

    def offset(self, k: int) -> "RandomStream":
        """Derived stream at index ``stream_index + k``."""
        return RandomStream(self.master_seed, self.stream_index + k)


@dataclass(frozen=True)
class TrialPlan:
    """Pair-generation events per frame, plus an optional accidental rate.

    ``accidental_rate`` is the per-trial probability that a non-coincidence
    outcome is promoted to an accidental coincidence (uncorrelated background
    within the coincidence window); default off.
    """

    n_trials: int
    accidental_rate: float = 0.0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials!r}")
        if not (0.0 <= self.accidental_rate < 1.0):
            raise ValueError(f"accidental_rate must be in [0, 1), got {self.accidental_rate!r}")


def sample_counts(probs: OutcomeProbabilities, plan: TrialPlan,
                  stream: RandomStream) -> CountTriple:
    """One multinomial draw of size ``n_trials`` over the three outcomes.

    With a nonzero accidental rate, each no-click or single-click trial is
    independently promoted to a coincidence after the multinomial draw.
    """
    rng = stream.generator()
    p = np.array([probs.p0, probs.p1, probs.p2], dtype=float)
    n0, n1, n2 = (int(v) for v in rng.multinomial(plan.n_trials, p / p.sum()))
    if plan.accidental_rate > 0.0:
        promoted0 = int(rng.binomial(n0, plan.accidental_rate)) if n0 else 0
        promoted1 = int(rng.binomial(n1, plan.accidental_rate)) if n1 else 0
        n0 -= promoted0
        n1 -= promoted1
        n2 += promoted0 + promoted1
    return CountTriple(n0, n1, n2)


def repeat_experiment(theta_true: float, loss: LossModel, cfg: InterferometerConfig,
                      dz: float, plan: TrialPlan, n_repeats: int,
                      stream: RandomStream) -> list[AngleEstimate]:
    """Independent simulate-then-estimate cycles at a fixed true angle.

    Counts are generated from the half-wave closed form at delay ``dz``;
    estimation uses the known loss and visibility (dip-frame estimator).
    Repeat ``r`` draws from ``stream.offset(r)``.
    """
    if n_repeats < 1:
        raise ValueError(f"n_repeats must be >= 1, got {n_repeats!r}")
    pc = coincidence_probability(theta_true, dz, cfg)
    probs = outcome_probabilities(pc, loss)
    estimates = []
    for r in range(n_repeats):
        counts = sample_counts(probs, plan, stream.offset(r))
        estimates.append(estimate_theta(counts, loss.gamma, cfg.alpha))
    return estimates
