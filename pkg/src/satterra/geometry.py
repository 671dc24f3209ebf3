"""Network geometry and large-scale link parameters.

Positions live in a right-handed Cartesian frame in meters. Gains are
handled in dB only at the boundaries; everything returned as a matrix or
vector for later stages is linear.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23
REFERENCE_TEMPERATURE_K = 290.0
EARTH_RADIUS_M = 6_371_000.0

# first positive zero of J1
J1_FIRST_ZERO = 3.8317059702075125


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite coordinate in {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class RadioConstants:
    """System-wide radio constants.

    Noise powers are linear watts. ``num_pilots`` equals the number of users
    since every user owns one orthogonal pilot.
    """

    carrier_frequency_ghz: float
    bandwidth_mhz: float
    coherence_block_len: int
    num_pilots: int
    pilot_power_w: float
    ap_noise_power_w: float
    sat_noise_power_w: float
    earth_radius_m: float = EARTH_RADIUS_M
    satellite_altitude_m: float = 400_000.0

    def __post_init__(self):
        if self.carrier_frequency_ghz <= 0 or self.bandwidth_mhz <= 0:
            raise ValueError("carrier frequency and bandwidth must be positive")
        if not self.coherence_block_len > self.num_pilots > 0:
            raise ValueError("need coherence_block_len > num_pilots > 0")
        if min(self.pilot_power_w, self.ap_noise_power_w, self.sat_noise_power_w) <= 0:
            raise ValueError("pilot and noise powers must be positive")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / (self.carrier_frequency_ghz * 1e9)

    @property
    def prelog(self) -> float:
        return 1.0 - self.num_pilots / self.coherence_block_len


@dataclass(frozen=True)
class ArrayGeometry:
    """Rectangular satellite array with ``n_h`` x ``n_v`` elements."""

    n_h: int
    n_v: int
    d_h_m: float
    d_v_m: float
    aperture_radius_m: float

    def __post_init__(self):
        if self.n_h < 1 or self.n_v < 1:
            raise ValueError("array needs at least one element per axis")
        if self.d_h_m <= 0 or self.d_v_m <= 0 or self.aperture_radius_m <= 0:
            raise ValueError("spacings and aperture radius must be positive")

    @property
    def n(self) -> int:
        return self.n_h * self.n_v

    @classmethod
    def half_wavelength(cls, n_h: int, n_v: int, wavelength_m: float,
                        aperture_wavelengths: float = 10.0) -> "ArrayGeometry":
        return cls(n_h, n_v, wavelength_m / 2, wavelength_m / 2,
                   aperture_wavelengths * wavelength_m)


@dataclass(frozen=True)
class LinkGains:
    ap_gain_dbi: float = 10.0
    user_gain_dbi: float = 10.0
    sat_gain_dbi: float = 26.9
    shadow_std_terrestrial_db: float = 8.0
    shadow_std_sat_db: float = 4.0

    def __post_init__(self):
        if self.shadow_std_terrestrial_db < 0 or self.shadow_std_sat_db < 0:
            raise ValueError("shadow fading standard deviations must be >= 0")


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(value)


def noise_power_w(bandwidth_mhz: float, noise_figure_db: float) -> float:
    """Thermal noise k_B * T0 * B * NF in watts."""
    return BOLTZMANN * REFERENCE_TEMPERATURE_K * bandwidth_mhz * 1e6 * 10 ** (noise_figure_db / 10)


def slant_range(elevation_rad: float, earth_radius_m: float = EARTH_RADIUS_M,
                altitude_m: float = 400_000.0) -> float:
    """Distance from a ground user to a satellite seen at ``elevation_rad``."""
    if not 0.0 <= elevation_rad <= math.pi / 2:
        raise ValueError(f"elevation {elevation_rad} outside [0, pi/2]")
    if earth_radius_m <= 0 or altitude_m <= 0:
        raise ValueError("radii must be positive")
    s = math.sin(elevation_rad)
    re_s = earth_radius_m * s
    return math.sqrt(re_s * re_s + altitude_m * altitude_m
                     + 2.0 * altitude_m * earth_radius_m) - re_s


def elevation_azimuth(user: Position3D, satellite: Position3D) -> tuple[float, float]:
    delta = satellite.as_array() - user.as_array()
    dist = float(np.linalg.norm(delta))
    if dist == 0.0:
        raise ValueError("user and satellite coincide")
    theta = math.asin(max(-1.0, min(1.0, delta[2] / dist)))
    omega = math.atan2(delta[1], delta[0])
    if omega == -math.pi:
        omega = math.pi
    return theta, omega


def boresight_offset(user: Position3D, satellite: Position3D, beam_center: Position3D) -> float:
    """Angle at the satellite between the user and the beam center."""
    a = user.as_array() - satellite.as_array()
    b = beam_center.as_array() - satellite.as_array()
    cos_phi = float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return math.acos(max(-1.0, min(1.0, cos_phi)))


def terrestrial_pathloss_db(g_m_dbi, g_k_dbi, f_c_ghz, distance_m, shadow_db=0.0):
    """3GPP rural large-scale gain between an AP and a user, in dB."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return (g_m_dbi + g_k_dbi - 8.50 - 20.0 * np.log10(f_c_ghz)
            - 38.63 * np.log10(d) + shadow_db)


def satellite_pathloss_db(g_dbi, g_k_dbi, beam_gain_db, f_c_ghz, slant_range_m, shadow_db=0.0):
    """Large-scale gain between a user and the satellite, in dB.

    The 32.45 constant is free-space loss with f in GHz and d in meters.
    """
    d = np.asarray(slant_range_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("slant range must be positive")
    return (g_dbi + g_k_dbi + beam_gain_db - 32.45 - 20.0 * np.log10(f_c_ghz)
            - 20.0 * np.log10(d) + shadow_db)


def beam_gain(offset_angle_rad: float, aperture_radius_m: float, wavelength_m: float) -> float:
    """Normalized circular-aperture beam pattern, 4|J1(u)/u|^2 with G(0) = 1."""
    if not 0.0 <= offset_angle_rad <= math.pi / 2:
        raise ValueError(f"offset angle {offset_angle_rad} outside [0, pi/2]")
    u = 2.0 * math.pi / wavelength_m * aperture_radius_m * math.sin(offset_angle_rad)
    if u < 1e-8:
        # J1(u)/u = 1/2 - u^2/16 + ...
        ratio = 0.5 - u * u / 16.0
    else:
        ratio = float(special.j1(u)) / u
    return 4.0 * ratio * ratio


def wave_vector(theta: float, omega: float, wavelength_m: float) -> np.ndarray:
    """Wave vector for elevation ``theta`` and azimuth ``omega``; norm 2*pi/lambda."""
    if wavelength_m <= 0:
        raise ValueError("wavelength must be positive")
    ct = math.cos(theta)
    return (2.0 * math.pi / wavelength_m) * np.array(
        [ct * math.cos(omega), ct * math.sin(omega), math.sin(theta)])


def antenna_offset(n: int, array: ArrayGeometry) -> np.ndarray:
    """Position of element ``n`` (1-based); the horizontal index runs fastest."""
    if not 1 <= n <= array.n:
        raise IndexError(f"antenna index {n} outside 1..{array.n}")
    return np.array([0.0, ((n - 1) % array.n_h) * array.d_h_m,
                     ((n - 1) // array.n_h) * array.d_v_m])


def antenna_offsets(array: ArrayGeometry) -> np.ndarray:
    """All element offsets as an (N, 3) array."""
    idx = np.arange(array.n)
    out = np.zeros((array.n, 3))
    out[:, 1] = (idx % array.n_h) * array.d_h_m
    out[:, 2] = (idx // array.n_h) * array.d_v_m
    return out


def los_vector(theta: float, omega: float, kappa: float, beta_linear: float,
               array: ArrayGeometry, wavelength_m: float) -> np.ndarray:
    if beta_linear <= 0 or kappa < 0:
        raise ValueError("need beta > 0 and kappa >= 0")
    amp = math.sqrt(kappa * beta_linear / (kappa + 1.0))
    phase = antenna_offsets(array) @ wave_vector(theta, omega, wavelength_m)
    return amp * np.exp(1j * phase)


def exponential_correlation(size: int, r: float) -> np.ndarray:
    if not abs(r) < 1:
        raise ValueError(f"correlation coefficient {r} must satisfy |r| < 1")
    idx = np.arange(size)
    return r ** np.abs(idx[:, None] - idx[None, :])


def correlation_matrix(beta_linear: float, kappa: float, r_h: float, r_v: float,
                       array: ArrayGeometry) -> np.ndarray:
    """Kronecker-structured covariance of the scattered satellite channel.

    The vertical factor is the outer one so that the matrix index follows the
    element numbering of :func:`antenna_offset`.
    """
    r_hor = exponential_correlation(array.n_h, r_h)
    r_ver = exponential_correlation(array.n_v, r_v)
    return kronecker_correlation(beta_linear, kappa, r_hor, r_ver)


def kronecker_correlation(beta_linear: float, kappa: float,
                          r_hor: np.ndarray, r_ver: np.ndarray) -> np.ndarray:
    for name, f in (("horizontal", r_hor), ("vertical", r_ver)):
        if not np.allclose(f, f.conj().T, atol=1e-12):
            raise ValueError(f"{name} correlation factor is not Hermitian")
        if np.linalg.eigvalsh(f).min() < -1e-12 * max(1.0, np.trace(f).real):
            raise ValueError(f"{name} correlation factor is not PSD")
    return (beta_linear / (kappa + 1.0)) * np.kron(r_ver, r_hor).astype(complex)
