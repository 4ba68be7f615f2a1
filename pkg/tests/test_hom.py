import numpy as np
import pytest

from hompol import (InterferometerConfig, coincidence_indistinguishable, coincidence_mixture,
                    coincidence_probability, dip_curve, overlap_probability, retarder)
from hompol.jones import HORIZONTAL, VERTICAL, linear_polarization


def test_config_validation():
    cfg = InterferometerConfig()
    assert abs(cfg.t) ** 2 + abs(cfg.r) ** 2 == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        InterferometerConfig(lc=-1.0)
    with pytest.raises(ValueError):
        InterferometerConfig(alpha=0.0)
    with pytest.raises(ValueError):
        InterferometerConfig(alpha=1.2)
    with pytest.raises(ValueError):
        InterferometerConfig(t=1.0, r=1.0)


def test_overlap_probability_values():
    assert overlap_probability(0.0, 1.0) == 1.0
    assert overlap_probability(1.0, 1.0) == pytest.approx(np.exp(-1.0), abs=1e-15)
    # ~1% indistinguishability change at a 100 um delay with lc = 1 mm
    assert overlap_probability(0.1, 1.0) == pytest.approx(0.990049834, abs=1e-9)


def test_overlap_probability_rejects_bad_lc():
    with pytest.raises(ValueError):
        overlap_probability(0.0, 0.0)
    with pytest.raises(ValueError):
        overlap_probability(0.0, -2.0)


def test_oracle_perfect_dip():
    assert coincidence_indistinguishable(np.eye(2), HORIZONTAL, HORIZONTAL) == pytest.approx(0.0, abs=1e-15)


def test_oracle_orthogonal_polarizations():
    assert coincidence_indistinguishable(retarder(np.pi / 4, np.pi), HORIZONTAL,
                                         HORIZONTAL) == pytest.approx(0.5, abs=1e-12)


def test_oracle_closed_form_family():
    # P_c = sin^2(delta/2) sin^2(2 theta) / 2 for horizontal inputs; the closed
    # form comes from the |<H|J|H>|^2 identity, the oracle never touches it
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        theta = rng.uniform(-np.pi, np.pi)
        delta = rng.uniform(0.0, 2.0 * np.pi)
        got = coincidence_indistinguishable(retarder(theta, delta), HORIZONTAL, HORIZONTAL)
        want = 0.5 * np.sin(delta / 2) ** 2 * np.sin(2 * theta) ** 2
        assert got == pytest.approx(want, abs=1e-12)


def test_oracle_general_reference_polarization():
    # rotating the reference instead of the sample gives the same overlap physics
    ref = linear_polarization(0.3)
    got = coincidence_indistinguishable(np.eye(2), ref, HORIZONTAL)
    assert got == pytest.approx(0.5 * (1.0 - np.cos(0.3) ** 2), abs=1e-12)


def test_oracle_rejects_non_unit_polarization():
    with pytest.raises(ValueError):
        coincidence_indistinguishable(np.eye(2), np.array([1.0, 1.0]), HORIZONTAL)


def test_closed_form_examples():
    cfg = InterferometerConfig(lc=1.0, alpha=1.0)
    assert coincidence_probability(0.0, 0.0, cfg) == 0.0
    for dz in (0.0, 0.5, 3.0):
        for alpha in (0.3, 1.0):
            c = InterferometerConfig(lc=1.0, alpha=alpha)
            assert coincidence_probability(np.pi / 4, dz, c) == pytest.approx(0.5, abs=1e-15)
    assert coincidence_probability(0.0, 1.0, cfg) == pytest.approx(0.5 * (1 - np.exp(-1)), abs=1e-12)
    assert coincidence_probability(0.0, 1.0, cfg) == pytest.approx(0.316060, abs=1e-6)


def test_mixture_baseline_far_from_dip():
    cfg = InterferometerConfig(lc=1.0, alpha=1.0)
    assert coincidence_mixture(np.eye(2), 1e6, cfg) == pytest.approx(0.5, abs=1e-15)


def test_mixture_matches_closed_form_point():
    cfg = InterferometerConfig(lc=1.0, alpha=1.0)
    got = coincidence_mixture(retarder(0.3, np.pi), 0.2, cfg)
    assert got == pytest.approx(coincidence_probability(0.3, 0.2, cfg), abs=1e-12)


def test_mixture_closed_form_equivalence_random():
    # dual route: closed form vs oracle-backed mixture, 1000 random draws
    rng = np.random.default_rng(31)
    for _ in range(1000):
        theta = rng.uniform(-np.pi, np.pi)
        dz = rng.uniform(-3.0, 3.0)
        alpha = rng.uniform(0.1, 1.0)
        cfg = InterferometerConfig(lc=1.0, alpha=alpha)
        got = coincidence_mixture(retarder(theta, np.pi), dz, cfg)
        assert got == pytest.approx(coincidence_probability(theta, dz, cfg), abs=1e-12)


def test_mixture_quarter_wave_identity():
    # for delta = pi/2 at dz = 0: P_c = sin^2(2 theta) / 4
    cfg = InterferometerConfig(lc=1.0, alpha=1.0)
    rng = np.random.default_rng(8)
    for _ in range(200):
        theta = rng.uniform(0.0, np.pi / 2)
        got = coincidence_mixture(retarder(theta, np.pi / 2), 0.0, cfg)
        assert got == pytest.approx(0.25 * np.sin(2 * theta) ** 2, abs=1e-12)


def test_coincidence_bounded_by_baseline():
    rng = np.random.default_rng(17)
    for _ in range(500):
        cfg = InterferometerConfig(lc=rng.uniform(0.5, 2.0), alpha=rng.uniform(0.1, 1.0))
        theta = rng.uniform(-np.pi, np.pi)
        delta = rng.uniform(0.0, 2.0 * np.pi)
        dz = rng.uniform(-5.0, 5.0)
        p = coincidence_mixture(retarder(theta, delta), dz, cfg)
        assert -1e-12 <= p <= 0.5 + 1e-12


def test_closed_form_theta_symmetries():
    cfg = InterferometerConfig(lc=1.0, alpha=0.9)
    rng = np.random.default_rng(3)
    for _ in range(300):
        theta = rng.uniform(-np.pi, np.pi)
        dz = rng.uniform(-2.0, 2.0)
        # negation symmetry is exact (cos is even bitwise)
        assert coincidence_probability(theta, dz, cfg) == coincidence_probability(-theta, dz, cfg)
        # the pi/2 period holds to float precision: theta + pi/2 itself rounds
        assert coincidence_probability(theta + np.pi / 2, dz, cfg) == pytest.approx(
            coincidence_probability(theta, dz, cfg), abs=2e-15)


def test_flat_dip_bottom():
    # central difference at dz = 0 with step 1e-4 lc: slope below 1e-8
    cfg = InterferometerConfig(lc=1.0, alpha=1.0)
    h = 1e-4 * cfg.lc
    slope = (coincidence_probability(0.1, h, cfg) - coincidence_probability(0.1, -h, cfg)) / (2 * h)
    assert abs(slope) < 1e-8


def test_dip_curve_symmetric_with_zero_minimum():
    cfg = InterferometerConfig(lc=1.0, alpha=1.0)
    dz = np.linspace(-3.0, 3.0, 61)
    curve = dip_curve(np.eye(2), dz, cfg)
    probs = curve[:, 1]
    assert probs[30] == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(probs, probs[::-1], atol=1e-15)
    # monotone in |dz|
    assert np.all(np.diff(probs[30:]) >= -1e-15)


def test_dip_curve_flat_for_crossed_sample():
    cfg = InterferometerConfig(lc=1.0, alpha=1.0)
    curve = dip_curve(retarder(np.pi / 4, np.pi), np.linspace(-2, 2, 21), cfg)
    assert np.allclose(curve[:, 1], 0.5, atol=1e-12)


def test_dip_curve_shifted_origin():
    # evaluating the sweep with a shifted dz origin moves the dip center
    cfg = InterferometerConfig(lc=1.0, alpha=1.0)
    shift = 0.06
    dz = np.linspace(-2.0, 2.0, 401)
    curve = dip_curve(np.eye(2), dz - shift, cfg)
    assert dz[np.argmin(curve[:, 1])] == pytest.approx(shift, abs=0.011)


def test_dip_curve_empty_raises():
    with pytest.raises(ValueError):
        dip_curve(np.eye(2), [], InterferometerConfig())
