"""Uplink ergodic SINR and throughput.

Closed-form MRC expressions for the hybrid, terrestrial-only and
satellite-only systems, plus a Monte-Carlo estimator of the generic
use-and-then-forget SINR for any linear combiner.

For a given mode the closed-form SINR of user k is

    rho_k c_k^2 / (sum_k' A[k, k'] rho_k' + NO_k)

where ``c_k`` is the mean desired gain, ``A`` collects every interference
and self-interference coefficient and ``NO_k`` the combined noise.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .channel import (ChannelRealization, ChannelStatistics, Scenario, chunk_plan,
                      draw_batch)
from .geometry import RadioConstants

#: trials per batch used for the batch-means standard error
MC_BATCH = 512


class SystemMode(enum.Enum):
    HYBRID = "hybrid"
    TERRESTRIAL = "terrestrial"
    SATELLITE = "satellite"

    @property
    def uses_satellite(self) -> bool:
        return self is not SystemMode.TERRESTRIAL

    @property
    def uses_aps(self) -> bool:
        return self is not SystemMode.SATELLITE


ALL_MODES = (SystemMode.HYBRID, SystemMode.TERRESTRIAL, SystemMode.SATELLITE)


@dataclass(frozen=True)
class SinrTerms:
    """Power-independent coefficients of the closed-form SINR for one mode."""

    gain: np.ndarray    # (K,) c_k
    cross: np.ndarray   # (K, K) A[k, k']
    noise: np.ndarray   # (K,) NO_k
    mode: SystemMode

    @property
    def gain2(self) -> np.ndarray:
        return self.gain ** 2


@dataclass(frozen=True)
class ThroughputReport:
    sinr: np.ndarray
    rate_mbps: np.ndarray
    mode: SystemMode
    signal: np.ndarray
    interference: np.ndarray
    noise: np.ndarray

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rate_mbps))

    @property
    def min_rate(self) -> float:
        return float(np.min(self.rate_mbps))


def _satellite_parts(stats: ChannelStatistics):
    pk = stats.pilot_gain
    g = stats.los
    gc = g.conj()
    theta, corr = stats.theta, stats.corr
    k = stats.num_users
    gram = gc @ g.T                                                   # g_k^H g_k'
    q_theta = np.einsum("bi,aib->ab", gc, theta @ g.T).real          # g_k'^H Theta_k g_k'
    q_corr = np.einsum("ai,bia->ab", gc, corr @ g.T).real            # g_k^H R_k' g_k
    tr_rt = (theta.transpose(0, 2, 1).reshape(k, -1) @ corr.reshape(k, -1).T).real  # tr(R_k' Theta_k)
    los_int = np.abs(gram) ** 2
    np.fill_diagonal(los_int, 0.0)
    cross = los_int + pk * q_theta + q_corr + pk * tr_rt
    gain = stats.los_norm2 + pk * stats.trace_theta
    noise = stats.radio.sat_noise_power_w * gain
    return gain, cross, noise


def _terrestrial_parts(stats: ChannelStatistics):
    gamma, beta = stats.gamma, stats.beta_terrestrial
    gain = gamma.sum(axis=0)
    cross = gamma.T @ beta
    noise = stats.radio.ap_noise_power_w * gain
    return gain, cross, noise


def sinr_terms(stats: ChannelStatistics, mode: SystemMode = SystemMode.HYBRID) -> SinrTerms:
    k = stats.num_users
    gain = np.zeros(k)
    cross = np.zeros((k, k))
    noise = np.zeros(k)
    if mode.uses_satellite:
        g, c, n = _satellite_parts(stats)
        gain, cross, noise = gain + g, cross + c, noise + n
    if mode.uses_aps and stats.num_aps:
        g, c, n = _terrestrial_parts(stats)
        gain, cross, noise = gain + g, cross + c, noise + n
    return SinrTerms(gain, cross, noise, mode)


def _check_powers(rho, k: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (k,):
        raise ValueError(f"need {k} powers, got shape {rho.shape}")
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise ValueError("powers must be finite and nonnegative")
    return rho


def sinr_from_terms(terms: SinrTerms, rho) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (sinr, signal, interference) for the given powers."""
    rho = _check_powers(rho, terms.gain.size)
    signal = rho * terms.gain2
    interference = kernels.compensated_matvec(terms.cross, rho)
    den = interference + terms.noise
    # a mode with no receivers (M = 0, terrestrial) has every term zero
    sinr = np.divide(signal, den, out=np.zeros_like(signal), where=den > 0)
    return sinr, signal, interference


def ergodic_rate(sinr, radio: RadioConstants, k_users: int):
    """Throughput in Mbps, (1 - K/tau_c) B log2(1 + SINR)."""
    if radio.coherence_block_len <= k_users:
        raise ValueError("coherence block must be longer than the pilot length")
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR must be nonnegative")
    return (1.0 - k_users / radio.coherence_block_len) * radio.bandwidth_mhz * np.log2(1.0 + sinr)


def rate_to_sinr(rate_mbps, radio: RadioConstants, k_users: int):
    """Inverse of :func:`ergodic_rate`."""
    scale = (1.0 - k_users / radio.coherence_block_len) * radio.bandwidth_mhz
    return np.exp2(np.asarray(rate_mbps, dtype=float) / scale) - 1.0


def sinr_closed_form(stats: ChannelStatistics, rho, mode: SystemMode = SystemMode.HYBRID
                     ) -> ThroughputReport:
    terms = sinr_terms(stats, mode)
    sinr, signal, interference = sinr_from_terms(terms, rho)
    rate = ergodic_rate(sinr, stats.radio, stats.num_users)
    return ThroughputReport(sinr, rate, mode, signal, interference, terms.noise.copy())


# --- combiners -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Combiner:
    """Linear detector; arrays may carry the same leading trial axis as a realization.

    ``u_sat`` is (K, N) with row k the vector u_k; ``u_ter`` is (M, K).
    """

    u_sat: np.ndarray
    u_ter: np.ndarray
    tag: str = "mrc"

    def __post_init__(self):
        if self.u_sat.shape[:-2] != self.u_ter.shape[:-2]:
            raise ValueError("satellite and AP combiners disagree on the trial axis")
        if self.u_sat.shape[-2] != self.u_ter.shape[-1]:
            raise ValueError("satellite and AP combiners disagree on K")


def make_mrc_combiner(realization: ChannelRealization) -> Combiner:
    return Combiner(realization.ghat_sat, realization.ghat_terrestrial, "mrc")


def _regularized_inverse_columns(h: np.ndarray, reg: float) -> np.ndarray:
    """Columns of H (H^H H + reg I)^-1 for H (..., rows, K)."""
    k = h.shape[-1]
    hh = np.swapaxes(h.conj(), -1, -2)
    gram = hh @ h + reg * np.eye(k)
    gram = 0.5 * (gram + np.swapaxes(gram.conj(), -1, -2))
    # (H G^-1)^H = G^-1 H^H since G is Hermitian
    return np.swapaxes(np.linalg.solve(gram, hh).conj(), -1, -2)


def make_mmse_combiner(realization: ChannelRealization, p_max: float,
                       sigma_s2: float, sigma_a2: float) -> Combiner:
    """Regularized zero-forcing style detector built from all users' estimates.

    The AP matrix is regularized with the AP noise power.
    """
    if p_max <= 0:
        raise ValueError("p_max must be positive")
    if sigma_s2 <= 0 or sigma_a2 <= 0:
        raise ValueError("noise powers must be positive")
    gs = np.swapaxes(realization.ghat_sat, -1, -2)      # (..., N, K)
    k = gs.shape[-1]
    us = _regularized_inverse_columns(gs, k * sigma_s2 / p_max)
    gt = realization.ghat_terrestrial                   # (..., M, K)
    if gt.shape[-2] == 0:
        ut = np.zeros_like(gt)
    else:
        ut = _regularized_inverse_columns(gt, k * sigma_a2 / p_max)
    return Combiner(np.swapaxes(us, -1, -2), ut, "mmse")


def overall_channel(combiner: Combiner, realization: ChannelRealization, k: int, kp: int,
                    mode: SystemMode = SystemMode.HYBRID) -> complex:
    """z_kk' = u_k^H g_k' + sum_m u_mk^* g_mk' for a single realization."""
    z = 0j
    if mode.uses_satellite:
        z += np.vdot(combiner.u_sat[k], realization.g_sat[kp])
    if mode.uses_aps:
        z += np.vdot(combiner.u_ter[:, k], realization.g_terrestrial[:, kp])
    return complex(z)


# --- Monte Carlo -----------------------------------------------------------

@dataclass(frozen=True)
class McEstimate:
    sinr: np.ndarray
    stderr: np.ndarray
    trials: int
    mode: SystemMode
    mean_z: np.ndarray        # (K,) E{z_kk}
    second_moment: np.ndarray  # (K, K) E{|z_kk'|^2}
    noise: np.ndarray         # (K,) semi-analytic noise term


def _controls(stats: ChannelStatistics, batch: ChannelRealization) -> np.ndarray:
    """Zero-mean functions of the estimates with exactly known first moments.

    Per AP and user: |ghat_mk|^2 / gamma_mk - 1 and |ghat_mk|^4 / (2 gamma_mk^2) - 1.
    Per user: the squared AP estimate energy over its mean, minus one.
    Per user pair k != k': sum_m |ghat_mk|^2 |ghat_mk'|^2 over its mean
    sum_m gamma_mk gamma_mk', minus one (estimates of different users are
    independent). Per user: the normalized energy and LoS projection of the
    satellite estimate.
    """
    t = batch.ghat_sat.shape[0]
    pk = stats.pilot_gain
    cols = []
    if stats.num_aps:
        x = np.abs(batch.ghat_terrestrial) ** 2 / stats.gamma
        cols += [(x - 1.0).reshape(t, -1), (0.5 * x * x - 1.0).reshape(t, -1)]
        # (sum_m |ghat_mk|^2)^2 has mean (sum_m gamma_mk)^2 + sum_m gamma_mk^2
        energy_t = np.sum(np.abs(batch.ghat_terrestrial) ** 2, axis=1)
        g = stats.gamma
        cols.append(energy_t ** 2 / (g.sum(axis=0) ** 2 + (g * g).sum(axis=0)) - 1.0)
        k = stats.num_users
        if k > 1:
            e2 = np.abs(batch.ghat_terrestrial) ** 2                     # (T, M, K)
            pair = np.einsum("tmk,tmj->tkj", e2, e2)
            mean = stats.gamma.T @ stats.gamma
            off = ~np.eye(k, dtype=bool)
            cols.append(pair[:, off] / mean[off] - 1.0)
    energy = stats.los_norm2 + pk * stats.trace_theta
    cols.append(np.sum(np.abs(batch.ghat_sat) ** 2, axis=2) / energy - 1.0)
    scale = np.sqrt(pk * np.einsum("ki,kij,kj->k", stats.los.conj(), stats.theta, stats.los).real)
    proj = np.einsum("ki,tki->tk", stats.los.conj(), batch.ghat_sat - stats.los)
    proj = np.divide(proj, scale, out=np.zeros_like(proj), where=scale > 0)
    cols += [proj.real, proj.imag]
    return np.concatenate(cols, axis=1)


def _observables(z: np.ndarray, z2: np.ndarray, us2: np.ndarray, ut2: np.ndarray) -> np.ndarray:
    """Per-trial quantities whose means assemble the generic SINR.

    Columns: Re z_kk, Im z_kk, |z_kk'|^2 (row-major), ||u_k||^2, sum_m |u_mk|^2.
    """
    t = z.shape[0]
    d = np.diagonal(z, axis1=1, axis2=2)
    return np.concatenate([d.real, d.imag, z2.reshape(t, -1), us2, ut2], axis=1)


def _assemble(mean_obs: np.ndarray, rho: np.ndarray, s2: float, a2: float):
    k = rho.size
    ez = mean_obs[:k] + 1j * mean_obs[k:2 * k]
    ez2 = mean_obs[2 * k:2 * k + k * k].reshape(k, k)
    us = mean_obs[2 * k + k * k:3 * k + k * k]
    ut = mean_obs[3 * k + k * k:]
    noise = s2 * us + a2 * ut
    sig = rho * np.abs(ez) ** 2
    # sum_k' rho_k' E|z_kk'|^2 - rho_k |E z_kk|^2
    den = ez2 @ rho - sig + noise
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(sig > 0, sig / den, 0.0)
    return sinr, ez, ez2, noise


class _Accumulator:
    """Batch sums of observables and controls plus their global cross moments."""

    def __init__(self):
        self.n = []
        self.sum_y = []
        self.sum_c = []
        self.cc = 0.0
        self.cy = 0.0

    def add(self, y: np.ndarray, c: np.ndarray | None):
        self.n.append(y.shape[0])
        self.sum_y.append(y.sum(axis=0))
        if c is not None:
            self.sum_c.append(c.sum(axis=0))
            self.cc = self.cc + c.T @ c
            self.cy = self.cy + c.T @ y

    def coefficients(self) -> np.ndarray | None:
        if not self.sum_c:
            return None
        n = float(sum(self.n))
        cbar = np.sum(self.sum_c, axis=0) / n
        ybar = np.sum(self.sum_y, axis=0) / n
        cov_c = self.cc / n - np.outer(cbar, cbar)
        cov_cy = self.cy / n - np.outer(cbar, ybar)
        keep = np.diag(cov_c) > 1e-12
        beta = np.zeros_like(cov_cy)
        if np.any(keep):
            sub = cov_c[np.ix_(keep, keep)]
            beta[keep] = np.linalg.lstsq(sub, cov_cy[keep], rcond=1e-10)[0]
        return beta

    def finish(self, rho, s2, a2, mode, k) -> McEstimate:
        n_b = np.array(self.n, dtype=float)
        n = n_b.sum()
        sum_y = np.array(self.sum_y)
        beta = self.coefficients()
        if beta is not None:
            # controls have mean zero, so subtracting their fitted part keeps the expectation
            sum_y = sum_y - np.array(self.sum_c) @ beta
        sinr, ez, ez2, noise = _assemble(sum_y.sum(axis=0) / n, rho, s2, a2)
        nb = n_b.size
        if nb > 1:
            per = np.array([_assemble(sum_y[i] / n_b[i], rho, s2, a2)[0] for i in range(nb)])
            w = n_b / n
            mean_b = w @ per
            var_b = (w @ (per - mean_b) ** 2) * nb / (nb - 1)
            stderr = np.sqrt(var_b / nb)
        else:
            stderr = np.full(k, np.nan)
        return McEstimate(sinr, stderr, int(n), mode, ez, ez2, noise)


COMBINER_RULES = ("mrc", "mmse-sat", "mmse")


def _combiner_for(rule: str, batch: ChannelRealization, p_max: float, radio: RadioConstants):
    """``mmse-sat`` uses the regularized detector on the satellite link only."""
    if rule == "mrc":
        return make_mrc_combiner(batch)
    if rule in ("mmse", "mmse-sat"):
        c = make_mmse_combiner(batch, p_max, radio.sat_noise_power_w, radio.ap_noise_power_w)
        if rule == "mmse-sat":
            return Combiner(c.u_sat, batch.ghat_terrestrial, rule)
        return c
    raise ValueError(f"unknown combiner rule {rule!r}")


def sinr_monte_carlo_modes(stats: ChannelStatistics, rho, modes: Iterable[SystemMode] = ALL_MODES,
                           combiner_rule: str = "mrc", trials: int = 10_000, seed: int = 0,
                           p_max: float | None = None, variance_reduction: bool = True
                           ) -> dict[SystemMode, McEstimate]:
    """Monte-Carlo SINR for several modes from one shared set of realizations.

    Data-phase noise enters through E{|u^H w|^2} = sigma^2 E{||u||^2} since
    the combiner is independent of that noise. With ``variance_reduction``
    the unknown channel is averaged out given its estimate (the estimation
    error is independent of the estimate, with covariance R - pK Theta and
    variance beta - gamma), and control variates built from the estimates
    absorb most of the remaining sampling noise. Both steps leave the
    expectation unchanged; the plain estimator averages raw draws.
    """
    if trials < 1000:
        raise ValueError("at least 10^3 trials are required")
    modes = tuple(modes)
    k = stats.num_users
    rho = _check_powers(rho, k)
    radio = stats.radio
    if p_max is None:
        p_max = float(rho.max()) if rho.max() > 0 else 1.0
    err_sat = stats.corr - stats.pilot_gain * stats.theta
    err_ter = stats.beta_terrestrial - stats.gamma
    accs = {m: _Accumulator() for m in modes}
    for _, size, ss in chunk_plan(trials, seed):
        batch = draw_batch(stats, size, np.random.default_rng(ss))
        comb = _combiner_for(combiner_rule, batch, p_max, radio)
        if variance_reduction:
            g_sat, g_ter = batch.ghat_sat, batch.ghat_terrestrial
        else:
            g_sat, g_ter = batch.g_sat, batch.g_terrestrial
        z_sat = comb.u_sat.conj() @ np.swapaxes(g_sat, 1, 2)              # (T, K, K)
        z_ter = np.swapaxes(comb.u_ter.conj(), 1, 2) @ g_ter              # (T, K, K)
        us2 = np.sum(np.abs(comb.u_sat) ** 2, axis=2)
        ut2 = np.sum(np.abs(comb.u_ter) ** 2, axis=1)
        if variance_reduction:
            # E{|u_k^H e_k'|^2 | ghat} and its AP counterpart
            e_sat = np.stack([np.sum((comb.u_sat.conj() @ err_sat[j]) * comb.u_sat, axis=2).real
                              for j in range(k)], axis=2)
            e_ter = (np.abs(comb.u_ter) ** 2).transpose(0, 2, 1) @ err_ter
            controls = _controls(stats, batch)
        else:
            e_sat = e_ter = 0.0
            controls = None
        zero = np.zeros_like(us2)
        parts = {
            SystemMode.HYBRID: (z_sat + z_ter, e_sat + e_ter, us2, ut2),
            SystemMode.SATELLITE: (z_sat, e_sat, us2, zero),
            SystemMode.TERRESTRIAL: (z_ter, e_ter, zero, ut2),
        }
        for m, acc in accs.items():
            z, e, a, b = parts[m]
            y = _observables(z, np.abs(z) ** 2 + e, a, b)
            for start in range(0, size, MC_BATCH):
                sl = slice(start, min(size, start + MC_BATCH))
                acc.add(y[sl], None if controls is None else controls[sl])
    s2, a2 = radio.sat_noise_power_w, radio.ap_noise_power_w
    return {m: acc.finish(rho, s2, a2, m, k) for m, acc in accs.items()}


def sinr_monte_carlo(scenario: Scenario | None, stats: ChannelStatistics, rho,
                     mode: SystemMode = SystemMode.HYBRID, combiner_rule: str = "mrc",
                     trials: int = 10_000, seed: int = 0,
                     variance_reduction: bool = True) -> McEstimate:
    p_max = None
    if scenario is not None:
        p_max = float(np.max(scenario.max_power_w))
    return sinr_monte_carlo_modes(stats, rho, (mode,), combiner_rule, trials, seed, p_max,
                                  variance_reduction)[mode]



# --- closed-form intermediate moments ---------------------------------------

def quadratic_form_second_moment(cov: np.ndarray, mat: np.ndarray) -> float:
    """E|x^H N x|^2 for x ~ CN(0, R): |tr(RN)|^2 + tr(R N R N^H)."""
    rn = cov @ mat
    return float(abs(np.trace(rn)) ** 2 + np.trace(rn @ cov @ mat.conj().T).real)


def moment_oracles(stats: ChannelStatistics, k: int, rho: Sequence[float] | None = None
                   ) -> dict[str, float]:
    """Closed-form MRC moments of user ``k`` (hybrid system).

    Names: ``a2`` E|a_kk|^2, ``atilde2`` E|a~_kk|^2, ``b2`` E|b_kk|^2,
    ``btilde2`` E|b~_kk|^2, ``ab`` E{a_kk b_kk}, ``z_mean`` E{z_kk},
    ``z2`` E|z_kk|^2 (compact form), ``z2_sum`` the same assembled from the
    parts, ``d2`` the cross-user interference sum for powers ``rho``.
    Here a is the estimate-estimate satellite term, a~ the estimate-error
    satellite term and b, b~ their AP counterparts.
    """
    kk = stats.num_users
    if not 0 <= k < kk:
        raise IndexError(f"user {k} outside 0..{kk - 1}")
    pk = stats.pilot_gain
    g = stats.los[k]
    r = stats.corr[k]
    c = pk * stats.theta[k]
    g2 = float(np.vdot(g, g).real)
    tr_c = float(np.trace(c).real)
    gcg = float(np.vdot(g, c @ g).real)
    grg = float(np.vdot(g, r @ g).real)
    tr_rc = float(np.trace(r @ c).real)
    tr_cc = float(np.trace(c @ c).real)
    gam = stats.gamma[:, k]
    beta = stats.beta_terrestrial[:, k]
    sg = float(gam.sum())

    out = {
        "a2": (g2 + tr_c) ** 2 + tr_cc + 2.0 * gcg,
        "atilde2": grg - gcg + tr_rc - tr_cc,
        "b2": float(np.sum(gam ** 2)) + sg ** 2,
        "btilde2": float(np.sum(gam * (beta - gam))),
        "ab": (tr_c + g2) * sg,
        "z_mean": g2 + tr_c + sg,
    }
    out["z2_sum"] = out["a2"] + out["atilde2"] + out["b2"] + out["btilde2"] + 2.0 * out["ab"]
    out["z2"] = (g2 + tr_c + sg) ** 2 + gcg + grg + tr_rc + float(np.sum(gam * beta))

    rho = np.ones(kk) if rho is None else np.asarray(rho, dtype=float)
    terms = sinr_terms(stats, SystemMode.HYBRID)
    others = np.arange(kk) != k
    out["d2"] = float(np.sum(terms.cross[k, others] * rho[others]))
    return out
