import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfmmw.optimizer import (InfeasibleError, Status, bcd_dl, bcd_ul, fronthaul_residual,
                             maxmin_power_dl, maxmin_power_ul, solve_quant_dl, solve_quant_ul)
from cfmmw.rates import dl_noise, fronthaul_dl_bound, fronthaul_ul_bound, rate, sinr_dl, \
    sinr_ul, ul_noise
from oracles import grid_maxmin_dl, grid_maxmin_ul, random_dl_instance, random_ul_instance

I2 = np.eye(2)[None]


def test_quant_dl_closed_forms():
    assert solve_quant_dl([1.0], I2, 2.0) == pytest.approx(1.0, rel=1e-6)
    assert solve_quant_dl([1.0], I2, 4.0) == pytest.approx(1 / 3, rel=1e-6)
    assert solve_quant_dl([0.0], I2, 4.0, sigma2_min=1e-18) == 1e-18


def test_quant_ul_closed_form_and_monotonicity():
    assert solve_quant_ul([0.0], I2, 1.0, 1.0, 2.0) == pytest.approx(1.0, rel=1e-6)
    a = solve_quant_ul([0.5], I2, 1.0, 0.1, 3.0)
    b = solve_quant_ul([1.0], I2, 1.0, 0.1, 3.0)
    assert b > a
    assert solve_quant_ul([1.0], I2, 1.0, 0.1, 1e6) == 1e-18
    with pytest.raises(InfeasibleError):
        solve_quant_ul([1.0], I2, 1.0, 0.1, 0.0)


@given(st.integers(0, 10_000), st.floats(0.5, 40.0))
def test_quant_residual_and_decreasing(seed, C):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 2, 2)) + 1j * rng.normal(size=(3, 2, 2))
    R = A @ np.conj(np.swapaxes(A, -1, -2))
    u = rng.uniform(0.01, 1, 3)
    s2 = solve_quant_dl(u, R, C)
    if s2 > 1e-18:
        assert abs(2 ** (fronthaul_dl_bound(u, R, s2) - C) - 1) < 1e-6
        assert fronthaul_dl_bound(u, R, 1.1 * s2) < C < fronthaul_dl_bound(u, R, 0.9 * s2)
    s2u = solve_quant_ul(u, R, 1.0, 0.3, C + 4)
    if s2u > 1e-18:
        assert abs(2 ** (fronthaul_ul_bound(u, R, s2u, 1.0, 0.3) - C - 4) - 1) < 1e-6


def test_maxmin_dl_examples():
    u, s = maxmin_power_dl(np.zeros((2, 2)), np.ones((1, 2)), [2.0], np.ones(2))
    assert np.allclose(u, [1, 1], rtol=1e-4) and s == pytest.approx(1.0, rel=1e-4)
    assert rate(s) == pytest.approx(1.0, rel=1e-4)
    u, s = maxmin_power_dl(np.zeros((1, 1)), np.ones((1, 1)), [3.0], np.array([0.5]))
    assert u[0] == pytest.approx(3.0) and s == pytest.approx(6.0)
    with pytest.raises(InfeasibleError):
        maxmin_power_dl(np.zeros((1, 1)), np.ones((1, 1)), [0.0], np.array([0.5]))


def test_maxmin_ul_examples():
    w, s = maxmin_power_ul(np.zeros((1, 1)), np.array([0.25]), 2.0)
    assert w[0] == 1.0 and s == pytest.approx(8.0)
    w, s = maxmin_power_ul(np.array([[0.1, 0.2], [0.2, 0.1]]), np.array([0.5, 0.5]), 1.0)
    assert np.allclose(w, [1, 1])


@pytest.mark.parametrize("seed", range(4))
def test_maxmin_matches_grid(seed):
    rng = np.random.default_rng(100 + seed)
    K, M = 2 + seed % 2, 1 + seed % 2
    inst = random_dl_instance(rng, K, M)
    _, s = maxmin_power_dl(*inst)
    assert s == pytest.approx(grid_maxmin_dl(*inst), rel=1e-3)
    uinst = random_ul_instance(rng, K)
    _, su = maxmin_power_ul(*uinst)
    assert su == pytest.approx(grid_maxmin_ul(*uinst), rel=1e-3)


@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 3))
def test_maxmin_dl_feasible_equal_sinr(seed, K, M):
    rng = np.random.default_rng(seed)
    varpi, theta, budget, noise = random_dl_instance(rng, K, M)
    u, s = maxmin_power_dl(varpi, theta, budget, noise)
    assert np.all(u >= 0) and np.all(theta @ u <= budget * (1 + 1e-9))
    assert np.max(theta @ u / budget) == pytest.approx(1.0, rel=1e-9)
    sinr = sinr_dl(u, varpi, noise)
    assert np.ptp(sinr) <= 1e-3 * sinr.min()


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_maxmin_ul_box_and_equal_sinr(seed, K):
    rng = np.random.default_rng(seed)
    delta, noise, P_u = random_ul_instance(rng, K)
    w, s = maxmin_power_ul(delta, noise, P_u)
    assert np.all(w >= 0) and np.all(w <= 1) and w.max() == 1.0
    sinr = sinr_ul(w, delta, noise, P_u)
    assert np.ptp(sinr) <= 1e-3 * sinr.min()


def test_maxmin_local_optimality_probe():
    rng = np.random.default_rng(5)
    varpi, theta, budget, noise = random_dl_instance(rng, 3, 2)
    u, s = maxmin_power_dl(varpi, theta, budget, noise)
    P = u * (1 + 0.05 * rng.standard_normal((10_000, 3)))
    P = np.clip(P, 0, None)
    P = P / np.max((P @ theta.T) / budget, axis=1, keepdims=True)   # project onto feasibility
    vals = np.min(P / (P @ varpi.T + noise), axis=1)
    assert vals.max() <= s * (1 + 1e-3)


def _bcd(prepared, **kw):
    c = prepared.config.replace(**kw) if kw else prepared.config
    E, ctx = prepared.expectations, prepared.context
    return c, bcd_dl(E, prepared.rf.R_rf, ctx.sigma_d2, c.ap_power_w, c.fronthaul_dl,
                     c.l_active, c.N), bcd_ul(E, prepared.rf.R_rf, ctx.sigma_u2, c.ms_power_w,
                                              c.fronthaul_ul)


def test_bcd_constraints(prepared):
    c, dl, ul = _bcd(prepared)
    E = prepared.expectations
    assert dl.status in (Status.CONVERGED, Status.MAX_ITERS)
    assert np.all(E.theta @ dl.powers + dl.sigma2_q * c.l_active * c.N <= c.ap_power_w * (1 + 1e-9))
    assert np.all(dl.fronthaul_bits <= c.fronthaul_dl + 1e-6)
    assert np.all((ul.powers >= 0) & (ul.powers <= 1))
    assert np.all(ul.fronthaul_bits <= c.fronthaul_ul + 1e-6)
    assert dl.min_rate == pytest.approx(np.min(dl.rates)) and len(dl.trace) == dl.iterations


def test_bcd_residuals_at_convergence(prepared):
    c, dl, ul = _bcd(prepared)
    for st_, cap in ((dl, c.fronthaul_dl), (ul, c.fronthaul_ul)):
        assert st_.status is Status.CONVERGED
        assert np.all(fronthaul_residual(st_.fronthaul_bits, cap, st_.sigma2_q, 1e-18) < 1e-3)


def test_bcd_infinite_capacity_matches_power_only(prepared):
    c, dl, ul = _bcd(prepared, fronthaul_dl=1e6, fronthaul_ul=1e6)
    E, ctx = prepared.expectations, prepared.context
    s2 = np.full(c.M, 1e-18)
    _, s_dl = maxmin_power_dl(E.varpi, E.theta, c.ap_power_w - s2 * c.l_active * c.N,
                              dl_noise(s2, prepared.rf.R_rf, ctx.sigma_d2))
    _, s_ul = maxmin_power_ul(E.delta, ul_noise(s2, E.nu_u, ctx.sigma_u2), c.ms_power_w)
    assert np.allclose(dl.sigma2_q, 1e-18) and np.allclose(ul.sigma2_q, 1e-18)
    assert dl.min_rate == pytest.approx(float(rate(s_dl)), rel=1e-3)
    assert ul.min_rate == pytest.approx(float(rate(s_ul)), rel=1e-3)


def test_bcd_initialization_robust(prepared):
    c = prepared.config
    E, ctx = prepared.expectations, prepared.context
    uniform = bcd_dl(E, prepared.rf.R_rf, ctx.sigma_d2, c.ap_power_w, c.fronthaul_dl,
                     c.l_active, c.N)
    one = np.zeros(c.K)
    k = int(np.argmin(E.theta.max(axis=0)))
    one[k] = 0.5 * c.ap_power_w / E.theta[:, k].max()
    other = bcd_dl(E, prepared.rf.R_rf, ctx.sigma_d2, c.ap_power_w, c.fronthaul_dl,
                   c.l_active, c.N, upsilon0=one)
    assert abs(uniform.min_rate - other.min_rate) < 1e-2


def test_bcd_infeasible_when_quantization_eats_budget(prepared):
    c = prepared.config
    E, ctx = prepared.expectations, prepared.context
    st_ = bcd_dl(E, prepared.rf.R_rf, ctx.sigma_d2, 1e-30, 0.01, c.l_active, c.N,
                 upsilon0=np.full(c.K, 1.0))
    assert st_.status is Status.INFEASIBLE and st_.min_rate == 0.0


def test_min_rate_nondecreasing_in_capacity(prepared):
    from cfmmw.harness import sweep_fronthaul
    out = sweep_fronthaul(prepared, (16, 32, 64, 256))
    for i in (0, 1):
        r = [pair[i].min_rate for pair in out]
        assert all(b >= a - 1e-3 for a, b in zip(r, r[1:]))
