import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from conftest import random_terms
from satterra import _kernels_py, kernels
from satterra.power_control import (capped_map, classify_and_score, fixed_point_residual,
                                    full_power_report, interference_function, interference_map,
                                    requirement_map, sinr_upper_bound, soft_removal_map,
                                    solve_fullpower_congestion, solve_maxmin, solve_soft_removal,
                                    update_map)
from satterra.channel import build_statistics
from satterra.harness import generate_drop
from satterra.throughput import SinrTerms, SystemMode, rate_to_sinr, sinr_from_terms, sinr_terms

SEEDS = st.integers(0, 2 ** 32 - 1)


def _pair(rng, k, alpha):
    """rho and rho' with rho / alpha <= rho' <= alpha * rho."""
    rho = rng.uniform(0.05, 1.0, k)
    return rho, rho * np.exp(rng.uniform(-1, 1, k) * math.log(alpha))


@settings(max_examples=300, deadline=None)
@given(SEEDS, st.floats(1.01, 10.0))
def test_interference_axioms(seed, alpha):
    t = random_terms(seed, self_limited=seed % 2 == 1)
    rng = np.random.default_rng(seed + 1)
    k = t.gain.size
    xi = rng.uniform(0.1, 3.0, k)
    rho = rng.uniform(0.0, 1.0, k)
    bigger = rho + rng.uniform(0.0, 1.0, k)
    for f in (interference_map, requirement_map):
        base = f(t, rho, xi)
        assert np.all(base > 0)
        assert np.all(f(t, bigger, xi) >= base)
        finite = np.isfinite(base)
        assert np.all(alpha * base[finite] > f(t, alpha * rho, xi)[finite])


@settings(max_examples=300, deadline=None)
@given(SEEDS, st.floats(1.01, 10.0))
def test_update_map_two_sided_scalable(seed, alpha):
    t = random_terms(seed)
    rng = np.random.default_rng(seed + 2)
    k = t.gain.size
    # keep every requirement finite: xi_k A_kk < c_k^2
    xi = rng.uniform(0.1, 0.9, k) * t.gain2 / np.diagonal(t.cross)
    xi = np.minimum(xi, 3.0)
    p = rng.uniform(0.2, 1.0, k)
    mu = np.where(rng.random(k) < 0.5, 0.0, rng.uniform(1.0, 5.0, k))
    rho, rho2 = _pair(rng, k, alpha)
    f, f2 = update_map(t, rho, xi, p, mu), update_map(t, rho2, xi, p, mu)
    assert np.all(f / alpha < f2) and np.all(f2 < alpha * f)
    assert np.all((f > 0) & (f <= p))


def test_requirement_matches_interference_at_fixed_points():
    t = random_terms(3, 4)
    xi = np.full(4, 0.5)
    rho = np.linalg.solve(np.diag(t.gain2) - xi[:, None] * t.cross, xi * t.noise)
    assert np.all(rho > 0)
    np.testing.assert_allclose(interference_map(t, rho, xi), rho, rtol=1e-12)
    np.testing.assert_allclose(requirement_map(t, rho, xi), rho, rtol=1e-12)


def test_requirement_infinite_when_self_limited():
    t = SinrTerms(np.array([1.0, 1.0]), np.array([[2.0, 0.1], [0.1, 0.1]]), np.array([0.1, 0.1]),
                  SystemMode.HYBRID)
    req = requirement_map(t, np.ones(2), np.array([1.0, 1.0]))
    assert math.isinf(req[0]) and math.isfinite(req[1])
    out = update_map(t, np.ones(2), [1.0, 1.0], 1.0, [2.0, 0.0])
    assert out[0] == 0.0


def test_interference_function_and_bounds(desk_stats):
    t = sinr_terms(desk_stats)
    rho = np.full(4, 10.0)
    assert interference_function(desk_stats, rho, 2, 1.5) == pytest.approx(
        1.5 * (t.cross[2] @ rho + t.noise[2]) / t.gain2[2], rel=1e-12)
    with pytest.raises(ValueError):
        interference_function(desk_stats, rho, 0, 0.0)
    with pytest.raises(ValueError):
        interference_map(t, -rho, 1.0)
    assert sinr_upper_bound(desk_stats, 100.0) == pytest.approx(np.min(100.0 * t.gain2 / t.noise))


def test_update_rules():
    t = random_terms(5, 3)
    rho = np.full(3, 0.4)
    xi = np.full(3, 0.8)
    need = requirement_map(t, rho, xi)
    np.testing.assert_allclose(capped_map(t, rho, xi, 1.0), np.minimum(need, 1.0), rtol=1e-13)
    mu = np.array([0.0, 1.5, 3.0])
    soft = soft_removal_map(t, rho, xi, 1.0, mu)
    want = np.where(mu > 0, np.minimum(1.0, 1.0 / (np.where(mu > 0, mu, 1) * need)), np.minimum(need, 1.0))
    np.testing.assert_allclose(soft, want, rtol=1e-13)
    with pytest.raises(ValueError):
        update_map(t, rho, xi, 1.0, [0.5, 0.0, 0.0])
    with pytest.raises(ValueError):
        update_map(t, rho, xi, -1.0)


def test_unit_rate_at_boundary_keeps_full_power():
    # one user whose requirement equals its budget exactly
    t = SinrTerms(np.array([1.0]), np.array([[0.2]]), np.array([0.1]), SystemMode.HYBRID)
    p = 2.0
    xi = p * t.gain2[0] / (t.noise[0] + p * t.cross[0, 0])
    out = update_map(t, [0.3], [xi], p, [1.0])
    assert out[0] == pytest.approx(p, rel=1e-14)


def lp_min_power(terms, xi, p):
    """Smallest total power meeting every target, or None if infeasible."""
    a = -(np.diag(terms.gain2) - xi[:, None] * terms.cross)
    b = -xi * terms.noise
    s = 1.0 / np.abs(a).max(axis=1)
    res = linprog(np.ones(xi.size), A_ub=a * s[:, None], b_ub=b * s,
                  bounds=list(zip(np.zeros(xi.size), p)), method="highs")
    return res.x if res.status == 0 else None


@pytest.mark.parametrize("drop", range(6))
def test_feasible_congestion_matches_lp(desk_config, drop):
    st_ = build_statistics(generate_drop(desk_config, drop))
    t = sinr_terms(st_)
    p = np.full(4, desk_config.p_max_w)
    xi = np.full(4, float(rate_to_sinr(40.0, st_.radio, 4)))
    lp = lp_min_power(t, xi, p)
    exact = np.linalg.solve(np.diag(t.gain2) - xi[:, None] * t.cross, xi * t.noise)
    assert lp is not None
    np.testing.assert_allclose(lp, exact, rtol=1e-6)
    a2, r2 = solve_fullpower_congestion(st_, xi, p)
    a3, r3 = solve_soft_removal(st_, xi, p)
    np.testing.assert_allclose(a2.rho, exact, rtol=5e-3)
    assert np.array_equal(a2.rho, a3.rho)
    assert len(r2.unsatisfied) == 0 and r2.jain == 1.0
    assert a3.iterations_outer == 1 and np.all(a3.removal_rate == 0)


def test_congested_drop_behaviour(desk_config):
    found = False
    for drop in range(10):
        st_ = build_statistics(generate_drop(desk_config, drop))
        p = np.full(4, desk_config.p_max_w)
        xi = np.full(4, float(rate_to_sinr(200.0, st_.radio, 4)))
        a2, r2 = solve_fullpower_congestion(st_, xi, p)
        a3, r3 = solve_soft_removal(st_, xi, p)
        _, rf = full_power_report(st_, xi, p)
        t = sinr_terms(st_)
        assert fixed_point_residual(t, a2.rho, xi, p) <= 1e-3
        assert fixed_point_residual(t, a3.rho, xi, p, a3.removal_rate) <= 1e-3
        for a in (a2, a3):
            assert np.all((a.rho >= 0) & (a.rho <= p))
        assert len(r3.satisfied) >= len(r2.satisfied)
        assert a3.rho.mean() <= a2.rho.mean() <= p.mean()
        if r2.unsatisfied:
            found = True
            assert a3.iterations_outer == 2
            assert np.all(a3.removal_rate[list(r2.unsatisfied)] >= 1.0)
    assert found
    with pytest.raises(TypeError):
        solve_soft_removal(sinr_terms(st_), xi, p)


def maxmin_lp_oracle(terms, p, tol=1e-9):
    lo, hi = 0.0, sinr_upper_bound(terms, p)
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if lp_min_power(terms, np.full(p.size, mid), p) is None:
            hi = mid
        else:
            lo = mid
    return lo


@pytest.mark.parametrize("seed", range(8))
def test_maxmin_matches_lp_bisection(seed):
    t = random_terms(100 + seed, 3)
    p = np.array([1.0, 0.7, 1.3])
    eps = 1e-4
    fr = solve_maxmin(t, p, delta=1e-6, epsilon=eps)
    opt = maxmin_lp_oracle(t, p)
    sinr = sinr_from_terms(t, fr.allocation.rho)[0]
    assert fr.allocation.converged
    # an inner loop stopped at eps may miss a feasible floor by ~eps relative
    assert fr.bracket[0] <= opt * (1 + 1e-9)
    assert opt * (1 - 10 * eps) <= fr.bracket[1]
    assert sinr.min() >= fr.xi_star * (1 - 1e-9)
    assert fr.xi_star >= opt * (1 - 10 * eps) - 1e-6
    assert np.all(fr.allocation.rho <= p)
    assert fr.xi_up == pytest.approx(sinr_upper_bound(t, p))


def test_maxmin_warm_start_and_errors():
    t = random_terms(7, 3)
    cold = solve_maxmin(t, 1.0, delta=1e-5)
    warm = solve_maxmin(t, 1.0, delta=1e-5, warm_start=True)
    assert warm.xi_star == pytest.approx(cold.xi_star, rel=2e-3)
    sinr = sinr_from_terms(t, warm.allocation.rho)[0]
    assert sinr.min() >= warm.xi_star * (1 - 1e-3)
    with pytest.raises(ValueError):
        solve_maxmin(t, 1.0, delta=0.0)
    short = solve_maxmin(t, 1.0, delta=1e-9, max_outer=3)
    assert not short.allocation.converged


def test_jain_cases():
    tgt = np.full(3, 10.0)
    assert classify_and_score([10, 12, 30], tgt).jain == 1.0
    r = classify_and_score([10, 0, 0], tgt)
    assert r.jain == pytest.approx(1 / 3, abs=1e-15)
    assert r.satisfied == (0,) and r.unsatisfied == (1, 2)
    assert classify_and_score([10, 5, 5], tgt).jain == pytest.approx(8 / 9, abs=1e-12)
    assert classify_and_score([0, 0, 0], tgt).jain == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        classify_and_score([1, 2], tgt)
    with pytest.raises(ValueError):
        classify_and_score([1, 2, 3], [1, 0, 1])


def test_compensated_matvec_accuracy():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((5, 400)) * 10.0 ** rng.integers(-8, 8, (5, 400))
    x = rng.uniform(0, 1, 400)
    got = kernels.compensated_matvec(a, x)
    want = [math.fsum(a[i] * x) for i in range(5)]
    np.testing.assert_allclose(got, want, rtol=1e-14, atol=1e-14 * np.abs(a * x).max())


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")
@settings(max_examples=200, deadline=None)
@given(SEEDS)
def test_backends_bit_identical(seed):
    from satterra import _kernels
    t = random_terms(seed, self_limited=seed % 3 == 0)
    rng = np.random.default_rng(seed)
    k = t.gain.size
    xi = rng.uniform(0.1, 4.0, k)
    p = rng.uniform(0.5, 2.0, k)
    mu = np.where(rng.random(k) < 0.5, 0.0, rng.uniform(1.0, 4.0, k))
    args = (t.gain2, t.cross, t.noise, xi, p, p.copy(), mu, 1e-6, 300)
    a = _kernels_py.power_iteration(*args)
    b = _kernels.power_iteration(*args)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1] and a[2] == b[2]
    assert np.array_equal(a[3], b[3]) and np.array_equal(a[4], b[4])
    np.testing.assert_array_equal(_kernels_py.compensated_matvec(t.cross, p),
                                  _kernels.compensated_matvec(t.cross, p))
