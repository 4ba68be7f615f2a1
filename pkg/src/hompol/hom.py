"""Two-photon Hong-Ou-Mandel interference model.

Two photons, one per interferometer arm, meet on a beam splitter after the
sample arm picks up a polarization transform J and a relative path delay dz.
Temporal distinguishability is handled as a mixture: with probability
``p(dz) = exp(-dz^2 / lc^2)`` the pair is perfectly indistinguishable, and
with probability ``1 - p(dz)`` fully distinguishable (coincidence 1/2 on a
balanced splitter). A setup constant ``alpha <= 1`` scales the interference
term and absorbs every non-polarization visibility loss, so the half-wave
closed form is

    P_c(dz, theta) = (1/2) * [1 - alpha * exp(-dz^2/lc^2) * cos^2(2 theta)].

``coincidence_indistinguishable`` is a brute-force oracle that evolves the
symmetrized two-photon amplitude through sample and beam splitter and sums
the output configurations with one photon per port; it is kept free of the
closed form so the two routes check each other.

Delays are millimeters, angles radians.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .jones import HORIZONTAL, validate_polarization

_INV_SQRT2 = 1.0 / np.sqrt(2.0)

#: Balanced, non-polarizing splitter: t = 1/sqrt(2), r = i/sqrt(2).
DEFAULT_SPLITTER = (complex(_INV_SQRT2), 1j * _INV_SQRT2)

_TOL = 1e-12


def _validate_splitter(t: complex, r: complex) -> None:
    if abs(abs(t) ** 2 + abs(r) ** 2 - 1.0) > _TOL:
        raise ValueError(f"beam splitter must satisfy |t|^2 + |r|^2 = 1, got t={t!r}, r={r!r}")


@dataclass(frozen=True)
class InterferometerConfig:
    """Setup constants of the interferometer.

    Attributes
    ----------
    lc : float
        Single-photon coherence length, millimeters (1/e half-width of the
        Gaussian wavepacket in path-length coordinate). Must be positive.
    alpha : float
        Maximum visibility of the setup, in (0, 1].
    t, r : complex
        Beam splitter transmission / reflection amplitudes.
    """

    lc: float = 1.0
    alpha: float = 1.0
    t: complex = DEFAULT_SPLITTER[0]
    r: complex = DEFAULT_SPLITTER[1]

    def __post_init__(self):
        if not (np.isfinite(self.lc) and self.lc > 0.0):
            raise ValueError(f"coherence length must be > 0, got {self.lc!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"max visibility must be in (0, 1], got {self.alpha!r}")
        _validate_splitter(self.t, self.r)

    @property
    def splitter(self) -> tuple[complex, complex]:
        return (self.t, self.r)


def overlap_probability(dz, lc: float):
    """Indistinguishability weight ``exp(-dz^2 / lc^2)`` of Gaussian wavepackets.

    Accepts scalar or array ``dz`` (millimeters).
    """
    if not (np.isfinite(lc) and lc > 0.0):
        raise ValueError(f"coherence length must be > 0, got {lc!r}")
    dz = np.asarray(dz, dtype=float)
    out = np.exp(-(dz * dz) / (lc * lc))
    return float(out) if out.ndim == 0 else out


def coincidence_indistinguishable(sample, reference_pol=HORIZONTAL, input_pol=HORIZONTAL,
                                  bs: tuple[complex, complex] = DEFAULT_SPLITTER) -> float:
    """Coincidence probability for a perfectly indistinguishable pair (oracle).

    Builds the symmetrized two-photon amplitude over the four single-photon
    modes (2 input paths x 2 polarizations), applies the sample Jones matrix
    to the signal path, the beam splitter to both paths, and sums squared
    amplitudes of every output configuration with exactly one photon per port.

    Mode index = 2 * path + pol with path 0 = signal, 1 = idler (mapped by the
    splitter onto output ports 1, 2) and pol 0 = H, 1 = V.
    """
    phi_in = validate_polarization(input_pol)
    phi_ref = validate_polarization(reference_pol)
    t, r = bs
    _validate_splitter(t, r)
    sample = np.asarray(sample, dtype=complex)
    if sample.shape != (2, 2):
        raise ValueError(f"sample Jones matrix must be 2x2, got shape {sample.shape}")

    chi_signal = np.zeros(4, dtype=complex)
    chi_signal[0:2] = phi_in
    chi_idler = np.zeros(4, dtype=complex)
    chi_idler[2:4] = phi_ref

    # Symmetrized ordered-pair amplitude psi[m1, m2]; renormalized because the
    # symmetrization is not norm-preserving for non-orthogonal polarizations.
    psi = np.outer(chi_signal, chi_idler) + np.outer(chi_idler, chi_signal)
    psi /= np.linalg.norm(psi)

    # Sample acts on signal-path polarizations only; idler untouched.
    sample_op = np.eye(4, dtype=complex)
    sample_op[0:2, 0:2] = sample
    psi = sample_op @ psi @ sample_op.T

    # Splitter mixes paths, not polarizations: path in -> (port 1, port 2).
    path_mix = np.array([[t, r], [r, t]], dtype=complex)
    bs_op = np.kron(path_mix, np.eye(2, dtype=complex))
    psi = bs_op @ psi @ bs_op.T

    ports = np.arange(4) // 2
    split = ports[:, None] != ports[None, :]
    return float(np.sum(np.abs(psi[split]) ** 2))


def coincidence_probability(theta, dz, cfg: InterferometerConfig):
    """Half-wave (delta = pi) closed form of the coincidence probability.

    ``(1/2) * [1 - alpha * exp(-dz^2/lc^2) * cos^2(2 theta)]``; scalar or
    broadcastable arrays for ``theta`` and ``dz``.
    """
    theta = np.asarray(theta, dtype=float)
    g = overlap_probability(dz, cfg.lc)
    out = 0.5 * (1.0 - cfg.alpha * np.asarray(g) * np.cos(2.0 * theta) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def coincidence_mixture(sample, dz: float, cfg: InterferometerConfig) -> float:
    """Coincidence probability of the delay-mixture state for any sample matrix.

    The indistinguishable component comes from the brute-force oracle with
    horizontal inputs; the distinguishable component contributes the balanced
    baseline 1/2. ``alpha`` scales the indistinguishable weight, so with a
    half-wave sample this reproduces the closed form exactly.
    """
    p_eff = cfg.alpha * overlap_probability(dz, cfg.lc)
    p_ind = coincidence_indistinguishable(sample, HORIZONTAL, HORIZONTAL, cfg.splitter)
    return p_eff * p_ind + (1.0 - p_eff) * 0.5


def dip_curve(sample, dz_values, cfg: InterferometerConfig) -> np.ndarray:
    """Pointwise mixture coincidence along a delay sweep.

    Returns an (n, 2) array of (dz_mm, coincidence_probability).
    """
    dz_values = np.atleast_1d(np.asarray(dz_values, dtype=float))
    if dz_values.size == 0:
        raise ValueError("dip_curve() needs a non-empty delay list")
    # One oracle call; only the overlap weight varies along the sweep.
    p_ind = coincidence_indistinguishable(sample, HORIZONTAL, HORIZONTAL, cfg.splitter)
    p_eff = cfg.alpha * overlap_probability(dz_values, cfg.lc)
    probs = p_eff * p_ind + (1.0 - p_eff) * 0.5
    return np.column_stack([dz_values, probs])
