import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satterra import geometry as geo

mpmath.mp.dps = 40


def slant_range_oracle(elev, re, h):
    """Law of cosines through the Earth-center angle, in high precision."""
    elev, re, h = mpmath.mpf(elev), mpmath.mpf(re), mpmath.mpf(h)
    psi = mpmath.acos(re * mpmath.cos(elev) / (re + h)) - elev
    return mpmath.sqrt(re ** 2 + (re + h) ** 2 - 2 * re * (re + h) * mpmath.cos(psi))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, math.pi / 2), st.floats(2e5, 2e6))
def test_slant_range_matches_law_of_cosines(elev, h):
    got = geo.slant_range(elev, geo.EARTH_RADIUS_M, h)
    want = float(slant_range_oracle(elev, geo.EARTH_RADIUS_M, h))
    assert got == pytest.approx(want, rel=1e-9)


def test_slant_range_limits():
    assert geo.slant_range(math.pi / 2, altitude_m=400e3) == pytest.approx(400e3, rel=1e-12)
    re, h = geo.EARTH_RADIUS_M, 400e3
    assert geo.slant_range(0.0, re, h) == pytest.approx(math.sqrt((re + h) ** 2 - re ** 2))
    with pytest.raises(ValueError):
        geo.slant_range(-0.1)
    with pytest.raises(ValueError):
        geo.slant_range(0.5, altitude_m=0.0)


def beam_oracle(phi, a, lam):
    u = 2 * mpmath.pi / lam * a * mpmath.sin(phi)
    if u == 0:
        return mpmath.mpf(1)
    return 4 * (mpmath.besselj(1, u) / u) ** 2


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 0.3))
def test_beam_gain_matches_bessel_oracle(phi):
    lam = 0.015
    a = 10 * lam
    got = geo.beam_gain(phi, a, lam)
    want = float(beam_oracle(phi, a, lam))
    assert got == pytest.approx(want, rel=1e-9, abs=1e-15)


def test_beam_gain_center_and_null():
    lam, a = 0.015, 0.15
    assert geo.beam_gain(0.0, a, lam) == 1.0
    assert geo.beam_gain(1e-12, a, lam) == pytest.approx(1.0, abs=1e-15)
    null = math.asin(geo.J1_FIRST_ZERO * lam / (2 * math.pi * a))
    assert geo.beam_gain(null, a, lam) < 1e-25
    with pytest.raises(ValueError):
        geo.beam_gain(-0.01, a, lam)


def test_noise_power_hand_value():
    # k_B * 290 K * 100 MHz = 4.00388e-13 W
    assert geo.noise_power_w(100.0, 0.0) == pytest.approx(1.380649e-23 * 290 * 1e8, rel=1e-15)
    assert geo.noise_power_w(100.0, 10.0) == pytest.approx(4.003882e-12, rel=1e-6)


def test_pathloss_hand_values():
    # 10 + 10 - 8.5 - 20 log10(20) - 38.63 log10(1000)
    assert geo.terrestrial_pathloss_db(10, 10, 20, 1000.0) == pytest.approx(-130.4105999, abs=1e-6)
    # 26.9 + 10 - 32.45 - 20 log10(20) - 20 log10(1e6)
    assert geo.satellite_pathloss_db(26.9, 10, 0.0, 20, 1e6) == pytest.approx(-141.5705999, abs=1e-6)
    with pytest.raises(ValueError):
        geo.terrestrial_pathloss_db(10, 10, 20, 0.0)
    with pytest.raises(ValueError):
        geo.satellite_pathloss_db(10, 10, 0, 20, -1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, math.pi / 2), st.floats(-math.pi, math.pi))
def test_wave_vector_norm(theta, omega):
    lam = 0.015
    k = geo.wave_vector(theta, omega, lam)
    assert np.linalg.norm(k) == pytest.approx(2 * math.pi / lam, rel=1e-12)
    assert k[2] == pytest.approx(2 * math.pi / lam * math.sin(theta), abs=1e-9)


def test_elevation_azimuth_simple_frames():
    user = geo.Position3D(0, 0, 0)
    theta, _ = geo.elevation_azimuth(user, geo.Position3D(0, 0, 5))
    assert theta == pytest.approx(math.pi / 2)
    theta, omega = geo.elevation_azimuth(user, geo.Position3D(1, 0, 1))
    assert theta == pytest.approx(math.pi / 4)
    assert omega == pytest.approx(0.0)
    _, omega = geo.elevation_azimuth(user, geo.Position3D(0, 1, 1))
    assert omega == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        geo.elevation_azimuth(user, user)


def test_boresight_offset():
    sat = geo.Position3D(0, 0, 1000)
    center = geo.Position3D(0, 0, 0)
    assert geo.boresight_offset(center, sat, center) == 0.0
    assert geo.boresight_offset(geo.Position3D(1000, 0, 0), sat, center) == pytest.approx(math.pi / 4)


def test_antenna_offsets_match_single_index():
    arr = geo.ArrayGeometry(3, 2, 0.1, 0.2, 1.0)
    table = geo.antenna_offsets(arr)
    for n in range(1, arr.n + 1):
        np.testing.assert_array_equal(table[n - 1], geo.antenna_offset(n, arr))
    np.testing.assert_allclose(table[4], [0.0, 0.1, 0.2])
    with pytest.raises(IndexError):
        geo.antenna_offset(0, arr)


def test_correlation_matches_naive_loop():
    arr = geo.ArrayGeometry(3, 4, 0.1, 0.1, 1.0)
    beta, kappa, rh, rv = 2.0, 3.0, 0.6, -0.3
    got = geo.correlation_matrix(beta, kappa, rh, rv, arr)
    want = np.empty((arr.n, arr.n))
    for a in range(arr.n):
        for b in range(arr.n):
            ha, va = a % arr.n_h, a // arr.n_h
            hb, vb = b % arr.n_h, b // arr.n_h
            want[a, b] = beta / (kappa + 1) * rh ** abs(ha - hb) * rv ** abs(va - vb)
    np.testing.assert_allclose(got, want, rtol=1e-14, atol=0)


def test_los_vector_matches_loop():
    arr = geo.ArrayGeometry(2, 3, 0.0075, 0.0075, 0.15)
    lam, theta, omega, kappa, beta = 0.015, 0.9, 0.4, 10.0, 1e-13
    got = geo.los_vector(theta, omega, kappa, beta, arr, lam)
    amp = math.sqrt(kappa / (kappa + 1) * beta)
    for n in range(1, arr.n + 1):
        phase = float(geo.antenna_offset(n, arr) @ geo.wave_vector(theta, omega, lam))
        assert got[n - 1] == pytest.approx(amp * complex(math.cos(phase), math.sin(phase)), rel=1e-12)


def test_validation_errors():
    with pytest.raises(ValueError):
        geo.Position3D(float("nan"), 0, 0)
    with pytest.raises(ValueError):
        geo.RadioConstants(20, 100, 4, 4, 1.0, 1e-13, 1e-13)
    with pytest.raises(ValueError):
        geo.RadioConstants(20, 100, 100, 4, 0.0, 1e-13, 1e-13)
    with pytest.raises(ValueError):
        geo.ArrayGeometry(0, 2, 0.1, 0.1, 1.0)
    with pytest.raises(ValueError):
        geo.LinkGains(shadow_std_sat_db=-1.0)
    with pytest.raises(ValueError):
        geo.exponential_correlation(3, 1.0)
    with pytest.raises(ValueError):
        geo.kronecker_correlation(1.0, 1.0, np.array([[1, 2], [0, 1.0]]), np.eye(2))
    with pytest.raises(ValueError):
        geo.kronecker_correlation(1.0, 1.0, np.array([[1, 2], [2, 1.0]]), np.eye(2))
    with pytest.raises(ValueError):
        geo.los_vector(0.5, 0.0, -1.0, 1.0, geo.ArrayGeometry(1, 1, 1, 1, 1), 0.01)
    with pytest.raises(ValueError):
        geo.wave_vector(0.1, 0.1, 0.0)


def test_radio_derived_values():
    r = geo.RadioConstants(20, 100, 10_000, 4, 100.0, 1e-13, 1e-13)
    assert r.wavelength_m == pytest.approx(geo.SPEED_OF_LIGHT / 20e9)
    assert r.prelog == pytest.approx(1 - 4 / 10_000)
    assert geo.linear_to_db(geo.db_to_linear(-37.5)) == pytest.approx(-37.5)
