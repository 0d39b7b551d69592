import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cfmmw import _kernels_py, kernels
from cfmmw.channel import DomainError, build_covariance, draw_cluster_geometry, draw_small_scale, \
    path_factor
from cfmmw.config import ConfigError, SimConfig
from cfmmw.rf import (build_rf_plan, downlink_noise_variance, equivalent_covariance, link_weight,
                      rf_column, rf_column_from_factor, select_users, uplink_noise_variance)

CFG = SimConfig()


def test_rf_column_examples():
    u = np.array([0.6, 0.8])
    assert np.array_equal(rf_column(np.outer(u, u)), np.ones(2))
    u = np.array([1, 1j]) / np.sqrt(2)
    assert np.allclose(rf_column(np.outer(u, u.conj())), [1, -1j])
    with pytest.raises(DomainError):
        rf_column(np.zeros((3, 3)))


@given(st.integers(0, 3000))
def test_rf_column_unit_modulus_and_factor_agrees(seed):
    g = draw_cluster_geometry(CFG, np.random.default_rng(seed), N=16)
    F = path_factor(g, 80.0, 16)
    R = F @ F.conj().T
    w = rf_column_from_factor(F)
    assert np.array_equal(np.abs(w), np.ones(16)) or np.allclose(np.abs(w), 1.0, atol=1e-15)
    # both routes give the same column up to numerical noise unless the top eigenvalue is degenerate
    ev = np.linalg.eigvalsh(R)
    if ev[-1] - ev[-2] > 1e-6 * ev[-1]:
        assert np.allclose(w, rf_column(R), atol=1e-6)


def test_link_weight_examples(rng):
    w = np.exp(1j * rng.uniform(-np.pi, np.pi, 8))
    assert link_weight(w, np.eye(8)) == pytest.approx(8.0)
    assert link_weight(w, np.zeros((8, 8))) == 0.0
    R1 = equivalent_covariance(w[:, None], np.eye(8))
    assert R1.shape == (1, 1) and R1[0, 0] == pytest.approx(8.0)
    assert not np.any(equivalent_covariance(np.ones((8, 2)), np.zeros((8, 8))))


def test_link_weight_matches_sampling():
    g = draw_cluster_geometry(CFG, np.random.default_rng(2), N=16)
    F = path_factor(g, 0.0, 16)
    w = rf_column_from_factor(F)
    h = draw_small_scale(F, np.random.default_rng(3), size=10_000)
    emp = np.mean(np.abs(w @ h) ** 2)
    assert emp == pytest.approx(link_weight(w, F @ F.conj().T), rel=0.05)


def test_equivalent_covariance_hermitian_psd(rng):
    g = draw_cluster_geometry(CFG, rng, N=16)
    R = build_covariance(g, 70.0, 16)
    W = np.exp(1j * rng.uniform(-np.pi, np.pi, (16, 4)))
    Rrf = equivalent_covariance(W, R)
    assert np.max(np.abs(Rrf - Rrf.conj().T)) < 1e-12 * np.abs(Rrf).max()
    assert np.linalg.eigvalsh(Rrf).min() >= -1e-10 * np.abs(Rrf).max()
    lam = np.linalg.eigvalsh(R)[-1]
    assert np.real(np.trace(Rrf)) <= 4 * 16 * lam * (1 + 1e-9)


def test_select_users_examples():
    assert select_users(np.array([[3.0, 2.0, 1.0]]), 2) == [[0, 1]]
    assert select_users(np.ones((2, 2)), 2) == [[0, 1], [0, 1]]
    with pytest.raises(DomainError):
        select_users(np.array([[-1.0, 1.0]]), 1)


xi_arrays = st.tuples(st.integers(1, 6), st.integers(1, 7)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.one_of(
        st.integers(0, 3).map(float), st.floats(0.0, 10.0, allow_subnormal=False))))


@given(xi_arrays, st.integers(1, 7))
def test_reverse_delete_degrees_and_backends(xi, L):
    M, K = xi.shape
    mask = _kernels_py.reverse_delete(xi, L)
    assert np.all(mask.sum(axis=1) == min(K, L))
    assert int((~mask).sum()) == M * max(K - L, 0)
    assert np.array_equal(mask, kernels.reverse_delete(xi, L))


@given(xi_arrays, st.integers(1, 7), st.floats(1e-3, 1e3))
def test_reverse_delete_scale_invariant(xi, L, c):
    # powers of two keep every float comparison exact
    c = 2.0 ** np.round(np.log2(c))
    assert np.array_equal(_kernels_py.reverse_delete(xi, L), _kernels_py.reverse_delete(c * xi, L))


def test_compiled_backend_loaded():
    assert kernels.BACKEND in ("cython", "python")


def test_uplink_noise_oracle():
    # hand-computed: T_u/N = 453.8566 K for G_LNA 22 dB, L_PS = L_PC_in = 3 dB, NF 1.6/7 dB
    assert uplink_noise_variance(1, CFG) == pytest.approx(1.2532333057390447e-13, rel=1e-12)
    assert uplink_noise_variance(64, CFG) == pytest.approx(64 * uplink_noise_variance(1, CFG))
    assert downlink_noise_variance(CFG) == pytest.approx(6.360793201074298e-13, rel=1e-12)


def test_uplink_noise_limit():
    c = SimConfig(g_lna_db=300.0, l_ps_db=0.0, l_pc_in_db=0.0)
    t_lna = 290.0 * (10 ** 0.16 - 1)
    assert uplink_noise_variance(4, c) == pytest.approx(1.380649e-23 * 4 * (290 + t_lna) * 20e6)


def test_rf_plan_invariants(prepared, desk):
    rf = prepared.rf
    assert np.array_equal(np.abs(rf.W), np.ones_like(rf.W, dtype=float)) or \
        np.allclose(np.abs(rf.W), 1.0, atol=1e-15)
    assert all(len(s) == desk.l_active for s in rf.served)
    R = rf.R_rf
    assert np.allclose(R, np.conj(np.swapaxes(R, -1, -2)), rtol=0, atol=1e-12 * np.abs(R).max())
