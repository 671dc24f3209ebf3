"""Long-term uplink power control.

Max-min fairness by bisection over a common SINR floor, and total-power
minimization under per-user SINR targets with two congestion policies:
pin unsatisfied users at full power, or softly remove them.

All solvers work on the power-independent SINR coefficients of
:mod:`satterra.throughput`, so the statistics are reduced once per drop.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import ChannelStatistics
from .throughput import SinrTerms, SystemMode, ergodic_rate, sinr_from_terms, sinr_terms

log = logging.getLogger(__name__)

DEFAULT_DELTA = 0.01
DEFAULT_EPSILON = 1e-4
DEFAULT_MAX_ITERS = 500
DEFAULT_MAX_OUTER = 64


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    rho: np.ndarray
    converged: bool
    iterations_outer: int
    iterations_inner: int
    trace_total: np.ndarray = field(repr=False)
    trace_min_sinr: np.ndarray = field(repr=False)
    # per-user soft removal rate, 0 for users on the capped update
    removal_rate: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean_power_dbw(self) -> float:
        m = float(np.mean(self.rho))
        return 10.0 * math.log10(m) if m > 0 else -math.inf


@dataclass(frozen=True, eq=False)
class FairnessResult:
    allocation: PowerAllocation
    xi_star: float
    bracket: tuple[float, float]
    xi_up: float
    inner_converged: bool = True


@dataclass(frozen=True, eq=False)
class CongestionReport:
    satisfied: tuple[int, ...]
    unsatisfied: tuple[int, ...]
    jain: float
    rates_mbps: np.ndarray
    target_mbps: np.ndarray

    @property
    def satisfied_pct(self) -> float:
        return 100.0 * len(self.satisfied) / self.rates_mbps.size

    @property
    def unsatisfied_pct(self) -> float:
        return 100.0 * len(self.unsatisfied) / self.rates_mbps.size


def _as_terms(stats, mode: SystemMode) -> SinrTerms:
    if isinstance(stats, SinrTerms):
        return stats
    return sinr_terms(stats, mode)


def _per_user(value, k: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (k,)).copy()
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be positive and finite")
    return arr


def _rates(mu, k: int) -> np.ndarray:
    if mu is None:
        return np.zeros(k)
    arr = np.broadcast_to(np.asarray(mu, dtype=float), (k,)).copy()
    if np.any(np.isnan(arr)) or np.any((arr != 0) & (arr < 1)):
        raise ValueError("removal rates must be 0 or at least 1")
    return arr


def interference_map(terms: SinrTerms, rho, xi) -> np.ndarray:
    """Vector of xi_k (MI_k(rho) + NO_k) / c_k^2 over all users."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("powers must be nonnegative")
    mi = kernels.compensated_matvec(terms.cross, rho)
    return np.asarray(xi, dtype=float) * (mi + terms.noise) / terms.gain2


def interference_function(stats: ChannelStatistics | SinrTerms, rho, k: int, xi: float,
                          mode: SystemMode = SystemMode.HYBRID) -> float:
    """I_k(rho), the power user k needs to reach SINR ``xi`` against ``rho``."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    return float(interference_map(_as_terms(stats, mode), rho, xi)[k])


def requirement_map(terms: SinrTerms, rho, xi) -> np.ndarray:
    """Power solving each user's own SINR equation against the others.

    ``xi_k (MI_-k + NO_k) / (c_k^2 - xi_k A_kk)``, infinite when the
    self-interference alone caps the SINR below ``xi_k``. Its fixed points
    under the cap coincide with those of :func:`interference_map`.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("powers must be nonnegative")
    xi = np.broadcast_to(np.asarray(xi, dtype=float), rho.shape)
    diag = np.diagonal(terms.cross)
    other = kernels.compensated_matvec(terms.cross, rho) - diag * rho + terms.noise
    dself = terms.gain2 - xi * diag
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(dself > 0, xi * other / dself, np.inf)


def update_map(terms: SinrTerms, rho, xi, p_max, mu=None) -> np.ndarray:
    """One step of the power update.

    Users with removal rate 0 take their requirement capped at ``p_max``;
    the others take ``min(P, P^2 / (mu * requirement))``.
    """
    k = terms.gain.size
    one = kernels.power_iteration(terms.gain2, terms.cross, terms.noise,
                                  _per_user(xi, k, "xi"), _per_user(p_max, k, "p_max"),
                                  np.asarray(rho, dtype=float), _rates(mu, k), -1.0, 1)
    return one[0]


def capped_map(terms: SinrTerms, rho, xi, p_max) -> np.ndarray:
    return update_map(terms, rho, xi, p_max)


def soft_removal_map(terms: SinrTerms, rho, xi, p_max, mu) -> np.ndarray:
    return update_map(terms, rho, xi, p_max, mu)


def sinr_upper_bound(stats: ChannelStatistics | SinrTerms, p_max,
                     mode: SystemMode = SystemMode.HYBRID) -> float:
    """Interference-free bound min_k P_k c_k^2 / NO_k."""
    terms = _as_terms(stats, mode)
    p = _per_user(p_max, terms.gain.size, "p_max")
    return float(np.min(p * terms.gain2 / terms.noise))


def fixed_point_residual(terms: SinrTerms, rho, xi, p_max, mu=None) -> float:
    """max_k |rho_k - f_k(rho)| / P_k for the update with removal rates ``mu``."""
    p = _per_user(p_max, terms.gain.size, "p_max")
    f = update_map(terms, rho, xi, p, mu)
    return float(np.max(np.abs(np.asarray(rho, dtype=float) - f) / p))


def _iterate(terms, xi, p, rho0, mu, eps, max_iters):
    return kernels.power_iteration(terms.gain2, terms.cross, terms.noise, xi, p, rho0,
                                   mu, eps, max_iters)


def solve_maxmin(stats: ChannelStatistics | SinrTerms, p_max, delta: float = DEFAULT_DELTA,
                 epsilon: float = DEFAULT_EPSILON, max_iters: int = DEFAULT_MAX_ITERS,
                 max_outer: int = DEFAULT_MAX_OUTER, mode: SystemMode = SystemMode.HYBRID,
                 warm_start: bool = False) -> FairnessResult:
    """Bisection on the common SINR floor with a capped fixed-point inner loop.

    Each candidate floor is accepted iff every user reaches it at the inner
    iterate. Inner loops restart from full power unless ``warm_start`` is
    set, in which case they start from the last accepted allocation. Warm
    iterates approach the fixed point from below, so that mode accepts a
    shortfall of ``10 * epsilon`` relative.
    ``converged`` reports whether the bracket closed to ``delta``;
    ``inner_converged`` whether every inner loop met ``epsilon``.
    """
    if delta <= 0 or epsilon <= 0:
        raise ValueError("delta and epsilon must be positive")
    terms = _as_terms(stats, mode)
    k = terms.gain.size
    p = _per_user(p_max, k, "p_max")
    served = np.zeros(k)
    slack = 10.0 * epsilon if warm_start else 1e-9
    xi_up = sinr_upper_bound(terms, p)
    lo, hi = 0.0, xi_up

    best = PowerAllocation(np.zeros(k), True, 0, 0, np.zeros(1), np.zeros(1), served)
    start = p.copy()
    outer = 0
    inner_total = 0
    inner_ok = True
    while hi - lo > delta and outer < max_outer:
        outer += 1
        xi = 0.5 * (lo + hi)
        xi_vec = np.full(k, xi)
        rho, it, conv, totals, msinr = _iterate(terms, xi_vec, p, start, served,
                                                epsilon, max_iters)
        inner_total += it
        inner_ok &= conv
        sinr, _, _ = sinr_from_terms(terms, rho)
        # rates are monotone in SINR, so comparing SINRs is the rate test
        if np.all(sinr >= xi * (1.0 - slack)):
            lo = xi
            best = PowerAllocation(rho, conv, outer, inner_total, totals, msinr, served)
            if warm_start:
                start = rho
        else:
            hi = xi
    converged = hi - lo <= delta
    alloc = PowerAllocation(best.rho, converged, outer, inner_total,
                            best.trace_total, best.trace_min_sinr, served)
    if not converged:
        log.warning("max-min bisection stopped with bracket [%g, %g]", lo, hi)
    return FairnessResult(alloc, lo, (lo, hi), xi_up, bool(inner_ok))


def classify_and_score(rates, target_rates, tol=None) -> CongestionReport:
    """Split users by whether they reach their target and compute Jain's index.

    ``tol`` defaults to 1e-6 of each target.
    """
    rates = np.asarray(rates, dtype=float)
    targets = np.asarray(target_rates, dtype=float)
    if rates.shape != targets.shape:
        raise ValueError("rates and targets must have the same shape")
    if np.any(targets <= 0):
        raise ValueError("targets must be positive")
    tol = 1e-6 * targets if tol is None else np.broadcast_to(np.asarray(tol, dtype=float),
                                                             targets.shape)
    ok = rates >= targets - tol
    k = rates.size
    sat = tuple(int(i) for i in np.flatnonzero(ok))
    uns = tuple(int(i) for i in np.flatnonzero(~ok))
    ratio = rates[~ok] / targets[~ok]
    num = (len(sat) + math.fsum(ratio)) ** 2
    den = k * len(sat) + k * math.fsum(ratio ** 2)
    jain = num / den if den > 0 else 1.0 / k
    return CongestionReport(sat, uns, jain, rates, targets)


def _congestion_report(terms, rho, xi, radio, k_users, epsilon) -> CongestionReport:
    sinr, _, _ = sinr_from_terms(terms, rho)
    rates = ergodic_rate(sinr, radio, k_users)
    targets = ergodic_rate(xi, radio, k_users)
    # allow the shortfall a fixed point stopped at ratio epsilon can leave
    floor = ergodic_rate(xi * (1.0 - 10.0 * epsilon), radio, k_users)
    tol = np.maximum(targets - floor, 1e-6 * targets)
    return classify_and_score(rates, targets, tol)


def _setup(stats, targets_xi, p_max, mode):
    if isinstance(stats, SinrTerms):
        raise TypeError("congestion solvers need ChannelStatistics to report rates")
    terms = sinr_terms(stats, mode)
    k = terms.gain.size
    return terms, _per_user(targets_xi, k, "targets_xi"), _per_user(p_max, k, "p_max")


def _capped_round(terms, xi, p, epsilon, max_iters):
    out = _iterate(terms, xi, p, p, np.zeros(xi.size), epsilon, max_iters)
    if not out[2]:
        log.warning("power iteration hit %d iterations without converging", max_iters)
    return out


def solve_fullpower_congestion(stats: ChannelStatistics, targets_xi, p_max,
                               epsilon: float = DEFAULT_EPSILON,
                               max_iters: int = DEFAULT_MAX_ITERS,
                               mode: SystemMode = SystemMode.HYBRID):
    """Fixed point of the capped update from full power.

    Users left at the cap below target are unsatisfied and keep full power.
    """
    terms, xi, p = _setup(stats, targets_xi, p_max, mode)
    rho, it, conv, totals, msinr = _capped_round(terms, xi, p, epsilon, max_iters)
    alloc = PowerAllocation(rho, conv, 1, it, totals, msinr, np.zeros(xi.size))
    return alloc, _congestion_report(terms, rho, xi, stats.radio, stats.num_users, epsilon)


def solve_soft_removal(stats: ChannelStatistics, targets_xi, p_max,
                       epsilon: float = DEFAULT_EPSILON,
                       max_iters: int = DEFAULT_MAX_ITERS,
                       mode: SystemMode = SystemMode.HYBRID):
    """Soft removal of unsatisfied users.

    The capped update runs first. Users it leaves below target get the
    removal rate mu_k = max(1, xi_k / SINR_k) measured at that point and
    switch to ``min(P_k, P_k^2 / (mu_k I_k))``; everyone else keeps the
    capped update, and the joint iteration runs to its fixed point. Removed
    users only ever lower their power, so the served users stay satisfied.
    """
    terms, xi, p = _setup(stats, targets_xi, p_max, mode)
    k = xi.size
    rho, it, conv, totals, msinr = _capped_round(terms, xi, p, epsilon, max_iters)
    sinr, _, _ = sinr_from_terms(terms, rho)
    short = sinr < xi * (1.0 - 10.0 * epsilon)
    mu = np.zeros(k)
    outer = 1
    if np.any(short):
        with np.errstate(divide="ignore"):
            mu[short] = np.maximum(1.0, xi[short] / sinr[short])
        rho, it2, conv2, totals2, msinr2 = _iterate(terms, xi, p, rho, mu, epsilon, max_iters)
        if not conv2:
            log.warning("soft removal hit %d iterations without converging", max_iters)
        it += it2
        conv = conv and conv2
        totals = np.concatenate([totals, totals2[1:]])
        msinr = np.concatenate([msinr[:-1], msinr2])
        outer = 2
    alloc = PowerAllocation(rho, conv, outer, it, totals, msinr, mu)
    return alloc, _congestion_report(terms, rho, xi, stats.radio, stats.num_users, epsilon)


def full_power_report(stats: ChannelStatistics, targets_xi, p_max,
                      mode: SystemMode = SystemMode.HYBRID):
    """Baseline where every user transmits at its budget."""
    terms, xi, p = _setup(stats, targets_xi, p_max, mode)
    sinr, _, _ = sinr_from_terms(terms, p)
    rates = ergodic_rate(sinr, stats.radio, stats.num_users)
    alloc = PowerAllocation(p, True, 0, 0, np.array([p.sum()]), np.array([sinr.min()]),
                            np.zeros(xi.size))
    return alloc, classify_and_score(rates, ergodic_rate(xi, stats.radio, stats.num_users))
