"""Jones-calculus primitives: polarization vectors, rotations, linear retarders.

Conventions
-----------
* Polarization vectors are complex length-2 numpy arrays (H, V amplitudes),
  unit norm.
* The rotation matrix is the active rotation ``[[cos t, sin t], [-sin t, cos t]]``.
  Any consistent sign convention gives the same cos^2(2 theta) observables;
  this one is fixed so results are bit-reproducible.
* A linear retarder with fast-axis angle ``theta`` and retardance ``delta`` is
  ``R(-theta) @ diag(exp(i delta/2), exp(-i delta/2)) @ R(theta)``.
* Global phases are never normalized away; all observables are squared moduli.

All angles are radians.
"""

from __future__ import annotations

import numpy as np

HORIZONTAL = np.array([1.0, 0.0], dtype=complex)
VERTICAL = np.array([0.0, 1.0], dtype=complex)

_UNIT_NORM_TOL = 1e-12


def linear_polarization(angle: float) -> np.ndarray:
    """Unit Jones vector of linear polarization at ``angle`` from horizontal."""
    if not np.isfinite(angle):
        raise ValueError(f"polarization angle must be finite, got {angle!r}")
    return np.array([np.cos(angle), np.sin(angle)], dtype=complex)


def validate_polarization(vec) -> np.ndarray:
    """Check shape (2,) and unit norm; return the vector as a complex array."""
    v = np.asarray(vec, dtype=complex)
    if v.shape != (2,):
        raise ValueError(f"polarization vector must have shape (2,), got {v.shape}")
    norm_sq = float(np.vdot(v, v).real)
    if not np.isfinite(norm_sq) or abs(norm_sq - 1.0) > _UNIT_NORM_TOL:
        raise ValueError(f"polarization vector must be unit norm, |v|^2 = {norm_sq!r}")
    return v


def rotation(theta: float) -> np.ndarray:
    """Active rotation matrix [[c, s], [-s, c]] with c=cos(theta), s=sin(theta)."""
    if not np.isfinite(theta):
        raise ValueError(f"rotation angle must be finite, got {theta!r}")
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]], dtype=complex)


def retarder(theta: float, delta: float) -> np.ndarray:
    """Jones matrix of a linear retarder.

    Parameters
    ----------
    theta : float
        Fast-axis angle from the laboratory horizontal, radians.
    delta : float
        Retardance (phase delay between principal axes), radians.
        ``delta = pi`` is a half-wave plate.
    """
    if not (np.isfinite(theta) and np.isfinite(delta)):
        raise ValueError(f"retarder parameters must be finite, got ({theta!r}, {delta!r})")
    half = 0.5 * delta
    core = np.array([[np.exp(1j * half), 0.0], [0.0, np.exp(-1j * half)]])
    return rotation(-theta) @ core @ rotation(theta)


def compose(elements) -> np.ndarray:
    """Product of stacked Jones matrices, first element acting first.

    ``compose([A, B])`` returns ``B @ A`` (light passes A, then B).
    """
    mats = [np.asarray(m, dtype=complex) for m in elements]
    if not mats:
        raise ValueError("compose() needs at least one element")
    out = mats[0]
    for m in mats[1:]:
        out = m @ out
    return out


def is_unitary(matrix, tol: float = _UNIT_NORM_TOL) -> bool:
    m = np.asarray(matrix, dtype=complex)
    return bool(np.all(np.abs(m.conj().T @ m - np.eye(2)) <= tol))


def horizontal_intensity(matrix) -> float:
    """Squared modulus of the H -> H amplitude, ``|<H|J|H>|^2``.

    For a half-wave retarder at angle theta this is Malus-like cos^2(2 theta);
    for general retardance it is cos^2(delta/2) + sin^2(delta/2) cos^2(2 theta).
    """
    m = np.asarray(matrix, dtype=complex)
    return float(abs(m[0, 0]) ** 2)


def effective_angle(matrix) -> float:
    """Effective fast-axis angle on the principal branch [0, pi/4].

    Defined through the horizontal intensity M as ``arccos(sqrt(M)) / 2``;
    it is what a visibility measurement with horizontal inputs resolves,
    and is invariant under global phases of the stack.
    """
    m = horizontal_intensity(matrix)
    return 0.5 * float(np.arccos(np.sqrt(np.clip(m, 0.0, 1.0))))
