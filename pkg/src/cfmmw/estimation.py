"""Uplink pilot observation and MMSE estimation of the equivalent channels.

Arrays are batched over APs: equivalent channels are (M, L_A, K) and
per-link matrices are (M, K, L_A, L_A).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pilots import PilotAssignment

__all__ = ["EstimationResult", "synthesize_pilot_rx", "mmse_matrices", "estimate_channels",
           "complex_normal"]


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    return np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class EstimationResult:
    D: np.ndarray        # MMSE filters
    Q: np.ndarray        # observation covariances
    R_hat: np.ndarray    # covariance of the estimates
    R_err: np.ndarray    # covariance of the estimation error


def synthesize_pilot_rx(G: np.ndarray, pilots: PilotAssignment, tau_p_power: float,
                        noise_var: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """Received pilot block ``sqrt(tau_p P_p) G Phi^T + N`` per AP.

    ``G`` is (M, L_A, K) or a single (L_A, K) block; ``tau_p_power`` is
    ``tau_p * P_p``. With ``rng`` None the noise is omitted.
    """
    Phi = pilots.book[:, pilots.assignment]           # tau_p x K
    Y = np.sqrt(tau_p_power) * (G @ Phi.T)
    if rng is not None and noise_var > 0:
        Y = Y + complex_normal(rng, Y.shape, noise_var)
    return Y


def mmse_matrices(R_rf: np.ndarray, pilots: PilotAssignment, tau_p_power: float,
                  noise_var: float) -> EstimationResult:
    """MMSE filters ``D = sqrt(tau_p P_p) R Q^{-1}`` and estimate covariances.

    ``Q_mk = tau_p P_p sum_k' R_mk' |phi_k'^T phi_k^*|^2 + sigma_u^2 I``.
    """
    R_rf = np.asarray(R_rf)
    LA = R_rf.shape[-1]
    overlap = pilots.overlap()                         # [k', k]
    Q = tau_p_power * np.einsum("jk,...jab->...kab", overlap, R_rf) \
        + noise_var * np.eye(LA)
    # R Q^{-1} = (Q^{-1} R)^H since both are Hermitian
    QinvR = np.linalg.solve(Q, R_rf)
    D = np.sqrt(tau_p_power) * np.conj(np.swapaxes(QinvR, -1, -2))
    R_hat = np.sqrt(tau_p_power) * (D @ R_rf)
    R_hat = 0.5 * (R_hat + np.conj(np.swapaxes(R_hat, -1, -2)))
    return EstimationResult(D, Q, R_hat, R_rf - R_hat)


def estimate_channels(Y: np.ndarray, D: np.ndarray, pilots: PilotAssignment) -> np.ndarray:
    """``g_hat_mk = D_mk Y_m phi_k^*``; returns the same layout as the channels."""
    Phi = pilots.book[:, pilots.assignment]
    proj = Y @ Phi.conj()                              # (..., L_A, K)
    return np.einsum("...kab,...bk->...ak", D, proj)
