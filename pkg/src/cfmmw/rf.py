"""Analog RF stage: phase-only beamformers, MS selection and receive-chain noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import ChannelDrop, DomainError
from .config import BOLTZMANN, T0_KELVIN, ConfigError, SimConfig

__all__ = ["RfPlan", "rf_column", "rf_column_from_factor", "link_weight", "select_users",
           "equivalent_covariance", "uplink_noise_variance", "downlink_noise_variance",
           "build_rf_plan", "weight_matrix"]


def _phases_of(u: np.ndarray) -> np.ndarray:
    # fix the e^{j psi} ambiguity: largest-magnitude entry made real positive,
    # lowest index among near-ties (ULA covariances give mirrored equal magnitudes)
    mag = np.abs(u)
    i = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])
    u = u * np.exp(-1j * np.angle(u[i]))
    return np.exp(-1j * np.angle(u))


def rf_column(R: np.ndarray) -> np.ndarray:
    """Unit-modulus column ``exp(-j angle(u_max))`` from the dominant eigenvector of R."""
    R = np.asarray(R, dtype=complex)
    if not np.any(R):
        raise DomainError("covariance is zero (outage link)")
    _, v = np.linalg.eigh(R)
    return _phases_of(v[:, -1])


def rf_column_from_factor(F: np.ndarray) -> np.ndarray:
    """Same as :func:`rf_column` for ``R = F F^H`` without forming R."""
    if not np.any(F):
        raise DomainError("covariance is zero (outage link)")
    u, _, _ = np.linalg.svd(F, full_matrices=False)
    return _phases_of(u[:, 0])


def link_weight(w: np.ndarray, R: np.ndarray) -> float:
    """Average equivalent-channel energy ``w^T R w^*``."""
    return float(np.real(w @ R @ w.conj()))


def equivalent_covariance(W: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``W^T R W^*``, Hermitian-symmetrised."""
    Rrf = W.T @ R @ W.conj()
    return 0.5 * (Rrf + Rrf.conj().T)


def select_users(xi: np.ndarray, L: int) -> list[list[int]]:
    """Reverse-delete MS selection; returns the sorted served MS indices per AP.

    Starts from every AP serving every MS and removes M(K - L) edges.
    With K <= L every AP keeps all MSs.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise DomainError("weights must be nonnegative")
    served = kernels.reverse_delete(xi, int(L))
    return [list(np.flatnonzero(row)) for row in served]


def _temperature(nf_db: float) -> float:
    return T0_KELVIN * (10.0 ** (nf_db / 10.0) - 1.0)


def uplink_noise_variance(N: int, config: SimConfig) -> float:
    """Noise power (W) at the output of one fully connected receive chain of N antennas."""
    g_lna = 10.0 ** (config.g_lna_db / 10.0)
    loss = 10.0 ** ((config.l_ps_db + config.l_pc_in_db) / 10.0)
    if g_lna <= 0 or loss <= 0:
        raise ConfigError("gains and losses must be positive")
    t_u = N * (T0_KELVIN + _temperature(config.nf_lna_db)
               + T0_KELVIN * (loss - 1.0) / g_lna
               + _temperature(config.nf_rf_db) * loss / g_lna)
    return BOLTZMANN * t_u * config.bandwidth_hz


def downlink_noise_variance(config: SimConfig) -> float:
    """Thermal noise (W) at an MS: k_B T0 B NF."""
    return BOLTZMANN * T0_KELVIN * config.bandwidth_hz * 10.0 ** (config.nf_ms_db / 10.0)


@dataclass(frozen=True)
class RfPlan:
    """Per-AP served sets, RF matrices and equivalent-channel factors.

    ``B[m][k]`` is ``W_m^T F_mk`` (L_A x paths) so that ``g_mk = B alpha`` and
    ``R_mk^RF = B B^H``.
    """
    served: tuple
    W: np.ndarray            # (M, N, L_A)
    xi: np.ndarray           # (M, K) weights of the per-MS dominant columns
    B: tuple
    R_rf: np.ndarray         # (M, K, L_A, L_A)

    @property
    def served_mask(self) -> np.ndarray:
        M, K = self.xi.shape
        mask = np.zeros((M, K), dtype=bool)
        for m, ks in enumerate(self.served):
            mask[m, ks] = True
        return mask


def weight_matrix(channel: ChannelDrop, N: int):
    """Dominant-eigenvector columns (M, K, N) and their weights xi (M, K)."""
    M, K = channel.shape
    cols = np.ones((M, K, N), dtype=complex)
    xi = np.zeros((M, K))
    for m in range(M):
        for k in range(K):
            F = channel.link(m, k).factor
            if not np.any(F):
                continue
            w = rf_column_from_factor(F)
            cols[m, k] = w
            xi[m, k] = float(np.sum(np.abs(w @ F) ** 2))
    return cols, xi


def build_rf_plan(channel: ChannelDrop, config: SimConfig) -> RfPlan:
    M, K = channel.shape
    N, LA = config.N, config.l_active
    cols, xi = weight_matrix(channel, N)
    served = select_users(xi, config.L)
    W = np.empty((M, N, LA), dtype=complex)
    B, R_rf = [], np.zeros((M, K, LA, LA), dtype=complex)
    for m in range(M):
        W[m] = cols[m, served[m]].T
        row = []
        for k in range(K):
            Bmk = W[m].T @ channel.link(m, k).factor
            row.append(Bmk)
            R_rf[m, k] = Bmk @ Bmk.conj().T
        B.append(tuple(row))
    return RfPlan(tuple(tuple(s) for s in served), W, xi, tuple(B), R_rf)
