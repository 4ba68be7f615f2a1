import numpy as np
import pytest

from hompol import compose, effective_angle, horizontal_intensity, retarder, rotation
from hompol.jones import HORIZONTAL, linear_polarization, validate_polarization, is_unitary


def test_rotation_zero_is_identity():
    assert np.array_equal(rotation(0.0), np.eye(2, dtype=complex))


def test_rotation_quarter_turn():
    expected = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
    assert np.allclose(rotation(np.pi / 2), expected, atol=1e-15)


def test_rotation_composition_adds_angles():
    # oracle: direct matrix product
    a, b = 0.3, 0.4
    assert np.allclose(rotation(a) @ rotation(b), rotation(a + b), atol=1e-15)


def test_rotation_rejects_non_finite():
    with pytest.raises(ValueError):
        rotation(np.nan)
    with pytest.raises(ValueError):
        rotation(np.inf)


def test_retarder_principal_axes_half_wave():
    assert np.allclose(retarder(0.0, np.pi), np.diag([1j, -1j]), atol=1e-15)


def test_retarder_zero_retardance_is_identity():
    for theta in (0.0, 0.37, 1.2, -0.9):
        assert np.allclose(retarder(theta, 0.0), np.eye(2), atol=1e-15)


def test_retarder_hwp_at_45deg():
    # hand product of R(-pi/4) diag(i, -i) R(pi/4)
    expected = np.array([[0.0, 1j], [1j, 0.0]])
    assert np.allclose(retarder(np.pi / 4, np.pi), expected, atol=1e-15)


def test_retarder_rejects_non_finite():
    with pytest.raises(ValueError):
        retarder(np.nan, np.pi)
    with pytest.raises(ValueError):
        retarder(0.1, np.inf)


def test_retarder_unitary_random():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        theta = rng.uniform(-np.pi, np.pi)
        delta = rng.uniform(0.0, 2.0 * np.pi)
        assert is_unitary(retarder(theta, delta), tol=1e-12)


def test_half_wave_plate_period():
    # retarder(theta + pi/2, pi) equals retarder(theta, pi) up to global phase
    rng = np.random.default_rng(7)
    for _ in range(200):
        theta = rng.uniform(0.0, np.pi)
        a = horizontal_intensity(retarder(theta, np.pi))
        b = horizontal_intensity(retarder(theta + np.pi / 2, np.pi))
        assert a == pytest.approx(b, abs=1e-12)


def test_horizontal_intensity_identity():
    # |<H|J|H>|^2 = cos^2(delta/2) + sin^2(delta/2) cos^2(2 theta)
    rng = np.random.default_rng(123)
    for _ in range(1000):
        theta = rng.uniform(-np.pi, np.pi)
        delta = rng.uniform(0.0, 2.0 * np.pi)
        got = horizontal_intensity(retarder(theta, delta))
        want = np.cos(delta / 2) ** 2 + np.sin(delta / 2) ** 2 * np.cos(2 * theta) ** 2
        assert got == pytest.approx(want, abs=1e-12)


def test_compose_identity_and_single():
    assert np.array_equal(compose([np.eye(2, dtype=complex)]), np.eye(2, dtype=complex))
    rng = np.random.default_rng(5)
    a = retarder(rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi))
    assert np.array_equal(compose([a]), a)


def test_compose_order_first_acts_first():
    a, b = retarder(0.2, 1.0), retarder(0.9, 2.0)
    assert np.allclose(compose([a, b]), b @ a, atol=1e-15)


def test_compose_two_half_waves_is_rotation():
    # two half-wave plates compose to a pure rotation by 2(t2 - t1), up to a
    # global phase of -1; oracle: direct product, checked via action on (1, 0)
    rng = np.random.default_rng(11)
    for _ in range(100):
        t1, t2 = rng.uniform(0.0, np.pi, size=2)
        product = compose([retarder(t1, np.pi), retarder(t2, np.pi)])
        v = product @ np.array([1.0, 0.0], dtype=complex)
        d = t2 - t1
        assert np.allclose(v, -np.array([np.cos(2 * d), np.sin(2 * d)]), atol=1e-12)
        assert is_unitary(product)


def test_compose_empty_raises():
    with pytest.raises(ValueError):
        compose([])


def test_linear_polarization_unit_norm():
    for angle in (0.0, 0.3, np.pi / 4, 2.0):
        validate_polarization(linear_polarization(angle))


def test_validate_polarization_rejects_bad():
    with pytest.raises(ValueError):
        validate_polarization(np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        validate_polarization(np.array([1.0, 0.0, 0.0]))


def test_effective_angle_folds_to_principal_branch():
    assert effective_angle(retarder(0.6, np.pi)) == pytest.approx(0.6, abs=1e-12)
    # beyond pi/4 the effective angle is the mirror value
    assert effective_angle(retarder(1.0, np.pi)) == pytest.approx(np.pi / 2 - 1.0, abs=1e-12)
    assert effective_angle(np.eye(2)) == 0.0


def test_effective_angle_global_phase_invariant():
    rng = np.random.default_rng(99)
    for _ in range(100):
        theta = rng.uniform(0.0, np.pi / 2)
        j = retarder(theta, np.pi)
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi))
        assert effective_angle(phase * j) == pytest.approx(effective_angle(j), abs=1e-12)
