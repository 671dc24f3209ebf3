"""Channel statistics and seeded small-scale realizations.

Realizations are produced by simulating the despread pilot observations and
running them through the MMSE estimators, so that the joint law of the true
channel and its estimate is exact.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

from .geometry import (ArrayGeometry, LinkGains, Position3D, RadioConstants,
                       correlation_matrix, elevation_azimuth, los_vector)

log = logging.getLogger(__name__)

#: trials drawn per independent RNG stream; fixed so results never depend on threading
CHUNK_TRIALS = 2048


@dataclass(frozen=True, eq=False)
class Scenario:
    """One network drop.

    ``beta_terrestrial`` is (M, K), ``beta_sat`` is (K,), both linear.
    M == 0 encodes a satellite-only network.
    """

    ap_positions: tuple[Position3D, ...]
    user_positions: tuple[Position3D, ...]
    satellite_position: Position3D
    radio: RadioConstants
    array: ArrayGeometry
    gains: LinkGains
    beta_terrestrial: np.ndarray
    beta_sat: np.ndarray
    kappa: np.ndarray
    max_power_w: np.ndarray
    corr_h: float = 0.5
    corr_v: float = 0.5

    def __post_init__(self):
        m, k = len(self.ap_positions), len(self.user_positions)
        if k < 1:
            raise ValueError("a scenario needs at least one user")
        if self.beta_terrestrial.shape != (m, k):
            raise ValueError(f"beta_terrestrial must be ({m}, {k}), got {self.beta_terrestrial.shape}")
        for name in ("beta_sat", "kappa", "max_power_w"):
            if getattr(self, name).shape != (k,):
                raise ValueError(f"{name} must have shape ({k},)")
        if np.any(self.beta_terrestrial <= 0) or np.any(self.beta_sat <= 0):
            raise ValueError("large-scale gains must be positive")
        if np.any(self.kappa < 0):
            raise ValueError("Rician factors must be nonnegative")
        if np.any(self.max_power_w <= 0):
            raise ValueError("power budgets must be positive")
        if self.radio.num_pilots != k:
            raise ValueError("one orthogonal pilot per user is required (num_pilots == K)")

    @property
    def num_aps(self) -> int:
        return len(self.ap_positions)

    @property
    def num_users(self) -> int:
        return len(self.user_positions)


@dataclass(frozen=True, eq=False)
class ChannelStatistics:
    """Per-user LoS vectors, correlation matrices and MMSE estimation statistics.

    ``los`` is (K, N); ``corr``, ``phi`` and ``theta`` are (K, N, N);
    ``gamma`` and ``beta_terrestrial`` are (M, K).
    """

    los: np.ndarray
    corr: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    beta_terrestrial: np.ndarray
    beta_sat: np.ndarray
    radio: RadioConstants
    condition_numbers: np.ndarray = field(repr=False)

    @property
    def num_users(self) -> int:
        return self.los.shape[0]

    @property
    def num_aps(self) -> int:
        return self.gamma.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.los.shape[1]

    @property
    def pilot_gain(self) -> float:
        """p * K, the despread pilot energy."""
        return self.radio.pilot_power_w * self.radio.num_pilots

    @cached_property
    def los_norm2(self) -> np.ndarray:
        return np.sum(np.abs(self.los) ** 2, axis=1)

    @cached_property
    def trace_theta(self) -> np.ndarray:
        return np.trace(self.theta, axis1=1, axis2=2).real

    @cached_property
    def corr_sqrt(self) -> np.ndarray:
        """Hermitian square roots of ``corr`` with negative eigenvalues clamped."""
        out = np.empty_like(self.corr)
        for k, r in enumerate(self.corr):
            w, v = np.linalg.eigh(r)
            tr = max(np.trace(r).real, np.finfo(float).tiny)
            if w.min() < -1e-9 * tr:
                warnings.warn(f"correlation matrix of user {k} has eigenvalue {w.min():.3e}; clamped")
            out[k] = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
        return out

    @cached_property
    def estimator_gain(self) -> np.ndarray:
        """sqrt(pK) R_k Phi_k for the satellite estimator."""
        return np.sqrt(self.pilot_gain) * (self.corr @ self.phi)

    def zeroed_satellite(self) -> "ChannelStatistics":
        """Copy with every satellite statistic set to zero (terrestrial-only network)."""
        z = np.zeros_like
        return ChannelStatistics(z(self.los), z(self.corr), self.phi, z(self.theta), self.gamma,
                                 self.beta_terrestrial, self.beta_sat, self.radio,
                                 self.condition_numbers)

    def without_aps(self) -> "ChannelStatistics":
        """Copy with the terrestrial part removed (M = 0)."""
        k = self.num_users
        return ChannelStatistics(self.los, self.corr, self.phi, self.theta, np.zeros((0, k)),
                                 np.zeros((0, k)), self.beta_sat, self.radio,
                                 self.condition_numbers)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Small-scale draw(s) of every channel and its MMSE estimate.

    Arrays may carry a leading trial axis: g_terrestrial (T, M, K) and
    g_sat (T, K, N). A single realization drops that axis.
    """

    g_terrestrial: np.ndarray
    g_sat: np.ndarray
    ghat_terrestrial: np.ndarray
    ghat_sat: np.ndarray


@dataclass(frozen=True)
class ErrorMoments:
    error_cov: np.ndarray        # (K, N, N) empirical E{e e^H}
    cross_cov: np.ndarray        # (K, N, N) empirical E{(ghat - mean)(e)^H}
    cross_cov_stderr: np.ndarray  # (K, N, N) elementwise standard error of cross_cov
    terrestrial_error_var: np.ndarray  # (M, K)
    terrestrial_cross: np.ndarray      # (M, K) empirical E{ghat e^*}
    trials: int


def build_statistics(scenario: Scenario) -> ChannelStatistics:
    radio = scenario.radio
    if radio.sat_noise_power_w <= 0 or radio.ap_noise_power_w <= 0:
        raise ValueError("noise powers must be positive")
    k_users, n = scenario.num_users, scenario.array.n
    lam = radio.wavelength_m
    pk = radio.pilot_power_w * radio.num_pilots

    los = np.empty((k_users, n), dtype=complex)
    corr = np.empty((k_users, n, n), dtype=complex)
    for k, user in enumerate(scenario.user_positions):
        theta_k, omega_k = elevation_azimuth(user, scenario.satellite_position)
        beta = float(scenario.beta_sat[k])
        kappa = float(scenario.kappa[k])
        los[k] = los_vector(theta_k, omega_k, kappa, beta, scenario.array, lam)
        corr[k] = correlation_matrix(beta, kappa, scenario.corr_h, scenario.corr_v, scenario.array)
    return statistics_from_parts(los, corr, scenario.beta_terrestrial, scenario.beta_sat, radio)


def statistics_from_parts(los, corr, beta_terrestrial, beta_sat, radio: RadioConstants
                          ) -> ChannelStatistics:
    """Estimation statistics from raw LoS vectors and correlation matrices."""
    los = np.asarray(los, dtype=complex)
    corr = np.asarray(corr, dtype=complex)
    beta_terrestrial = np.asarray(beta_terrestrial, dtype=float)
    k_users, n = los.shape
    pk = radio.pilot_power_w * radio.num_pilots
    s2 = radio.sat_noise_power_w
    eye = np.eye(n)

    phi = np.empty_like(corr)
    theta = np.empty_like(corr)
    cond = np.empty(k_users)
    for k in range(k_users):
        a = pk * corr[k] + s2 * eye
        a = 0.5 * (a + a.conj().T)
        ev = np.linalg.eigvalsh(a)
        cond[k] = ev[-1] / ev[0]
        phi[k] = linalg.solve(a, eye, assume_a="pos")
        th = corr[k] @ phi[k] @ corr[k]
        theta[k] = 0.5 * (th + th.conj().T)
    log.debug("max condition number of pK R + s2 I: %.3e", cond.max())

    # the AP estimator sees the AP noise sigma_a^2
    pkb = pk * beta_terrestrial
    gamma = pk * beta_terrestrial ** 2 / (pkb + radio.ap_noise_power_w)
    return ChannelStatistics(los, corr, phi, theta, gamma, beta_terrestrial,
                             np.asarray(beta_sat, dtype=float), radio, cond)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(0.5)


def chunk_plan(trials: int, seed: int, chunk: int = CHUNK_TRIALS):
    """Split ``trials`` into fixed-size chunks, each with its own derived seed.

    The i-th chunk always gets ``SeedSequence(seed, spawn_key=(i,))`` so the
    draws are identical however the chunks are scheduled.
    """
    out = []
    start = 0
    i = 0
    while start < trials:
        size = min(chunk, trials - start)
        out.append((i, size, np.random.SeedSequence(seed, spawn_key=(i,))))
        start += size
        i += 1
    return out


def draw_batch(stats: ChannelStatistics, trials: int, rng: np.random.Generator,
               *, pilot_noise: bool = True) -> ChannelRealization:
    """Draw ``trials`` independent coherence blocks with their MMSE estimates."""
    m, k = stats.gamma.shape
    n = stats.num_antennas
    pk = stats.pilot_gain
    radio = stats.radio
    sqpk = np.sqrt(pk)

    beta = stats.beta_terrestrial
    g_ter = np.sqrt(beta) * _complex_normal(rng, (trials, m, k))
    w = _complex_normal(rng, (trials, k, n))
    g_sat = stats.los + np.einsum("kij,tkj->tki", stats.corr_sqrt, w)

    noise_ter = _complex_normal(rng, (trials, m, k)) * np.sqrt(radio.ap_noise_power_w)
    noise_sat = _complex_normal(rng, (trials, k, n)) * np.sqrt(radio.sat_noise_power_w)
    if not pilot_noise:
        noise_ter[...] = 0.0
        noise_sat[...] = 0.0

    # despread pilot observations y_pm^H phi_k and Y_p phi_k
    y_ter = sqpk * g_ter + noise_ter
    y_sat = sqpk * g_sat + noise_sat

    ghat_ter = (sqpk * beta / (pk * beta + radio.ap_noise_power_w)) * y_ter
    innov = y_sat - sqpk * stats.los
    ghat_sat = stats.los + np.einsum("kij,tkj->tki", stats.estimator_gain, innov)
    return ChannelRealization(g_ter, g_sat, ghat_ter, ghat_sat)


def sample_realization(stats: ChannelStatistics, scenario: Scenario | None = None,
                       seed: int = 0, *, pilot_noise: bool = True) -> ChannelRealization:
    """One seeded realization; equal seeds give bit-identical output."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    b = draw_batch(stats, 1, rng, pilot_noise=pilot_noise)
    return ChannelRealization(b.g_terrestrial[0], b.g_sat[0], b.ghat_terrestrial[0], b.ghat_sat[0])


def sample_realizations(stats: ChannelStatistics, trials: int, seed: int):
    """Yield realization batches chunk by chunk, in chunk order."""
    for _, size, ss in chunk_plan(trials, seed):
        yield draw_batch(stats, size, np.random.default_rng(ss))


def estimation_error_moments(stats: ChannelStatistics, scenario: Scenario | None = None,
                             trials: int = 10_000, seed: int = 0) -> ErrorMoments:
    """Empirical covariance of e_k = g_k - ghat_k and its cross-covariance with ghat_k."""
    if trials < 10_000:
        raise ValueError("at least 10^4 trials are required")
    k, n = stats.los.shape
    m = stats.num_aps
    err_cov = np.zeros((k, n, n), dtype=complex)
    cross = np.zeros((k, n, n), dtype=complex)
    cross_sq = np.zeros((k, n, n))
    ter_var = np.zeros((m, k))
    ter_cross = np.zeros((m, k), dtype=complex)
    for b in sample_realizations(stats, trials, seed):
        e = b.g_sat - b.ghat_sat
        centred = b.ghat_sat - stats.los
        err_cov += np.einsum("tki,tkj->kij", e, e.conj())
        prod = centred[:, :, :, None] * e.conj()[:, :, None, :]
        cross += prod.sum(axis=0)
        cross_sq += (np.abs(prod) ** 2).sum(axis=0)
        e_t = b.g_terrestrial - b.ghat_terrestrial
        ter_var += (np.abs(e_t) ** 2).sum(axis=0)
        ter_cross += (b.ghat_terrestrial * e_t.conj()).sum(axis=0)
    cross /= trials
    stderr = np.sqrt(np.maximum(cross_sq / trials - np.abs(cross) ** 2, 0.0) / trials)
    return ErrorMoments(err_cov / trials, cross, stderr, ter_var / trials,
                        ter_cross / trials, trials)
