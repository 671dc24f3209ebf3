"""Pure-Python/numpy fallback for the compiled kernels in ``_kernels.pyx``.

Every floating-point operation happens in the same order as in the compiled
version so both backends return bit-identical results.
"""
from __future__ import annotations

import numpy as np


def compensated_matvec(cross: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Row sums of ``cross * rho`` with Neumaier compensation, columns in order."""
    cross = np.ascontiguousarray(cross, dtype=float)
    rho = np.ascontiguousarray(rho, dtype=float)
    k = cross.shape[0]
    s = np.zeros(k)
    c = np.zeros(k)
    for j in range(cross.shape[1]):
        y = cross[:, j] * rho[j]
        t = s + y
        big = np.abs(s) >= np.abs(y)
        c += np.where(big, (s - t) + y, (y - t) + s)
        s = t
    return s + c


def _seq_sum(x: np.ndarray) -> float:
    total = 0.0
    for v in x.tolist():
        total += v
    return total


def split_cross(cross):
    """Zero-diagonal copy of ``cross`` and its diagonal."""
    off = np.array(cross, dtype=float, order="C")
    diag = off.diagonal().copy()
    np.fill_diagonal(off, 0.0)
    return off, diag


def power_iteration(gain2, cross, noise, xi, pmax, rho0, mu, eps: float, max_iters: int):
    """Jacobi iteration of the per-user power update.

    Each user's requirement is the power solving its own SINR equation
    against the others, ``xi (MI_-k + NO) / (c^2 - xi A_kk)`` (infinite when
    the denominator is not positive). Users with ``mu == 0`` take the
    requirement capped at ``pmax``; users with ``mu > 0`` take
    ``min(pmax, pmax^2 / (mu * requirement))``.

    Stops once both the relative change of the total power and the largest
    per-user step relative to ``pmax`` are at most ``eps``. Returns
    ``(rho, iterations, converged, totals, min_sinr)``; the traces hold one
    entry per iterate starting with ``rho0``.
    """
    gain2 = np.asarray(gain2, dtype=float)
    off, diag = split_cross(cross)
    noise = np.asarray(noise, dtype=float)
    xi = np.asarray(xi, dtype=float)
    pmax = np.asarray(pmax, dtype=float)
    mu = np.asarray(mu, dtype=float)
    rho = np.array(rho0, dtype=float)
    dself = gain2 - xi * diag
    removed = mu > 0.0

    totals = [_seq_sum(rho)]
    min_sinr = []
    converged = False
    it = 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        while it < max_iters:
            other = compensated_matvec(off, rho) + noise
            full = other + diag * rho
            min_sinr.append(float(np.min(rho * gain2 / full)))
            need = np.where(dself > 0.0, xi * other / dself, np.inf)
            soft = np.minimum(pmax * pmax / (mu * need), pmax)
            new = np.where(removed, soft, np.minimum(need, pmax))
            step = float(np.max(np.abs(new - rho) / pmax))
            it += 1
            old_total = totals[-1]
            rho = new
            total = _seq_sum(rho)
            totals.append(total)
            if old_total > 0.0:
                ratio = abs(total - old_total) / old_total
            else:
                ratio = 0.0 if total == 0.0 else np.inf
            if ratio <= eps and step <= eps:
                converged = True
                break
    other = compensated_matvec(off, rho) + noise
    full = other + diag * rho
    min_sinr.append(float(np.min(rho * gain2 / full)))
    return rho, it, converged, np.array(totals), np.array(min_sinr)
