"""ZF baseband filters, Monte Carlo expectation terms, SINRs and fronthaul bounds.

Stacked equivalent channels are (M*L_A, K): rows ``m*L_A .. (m+1)*L_A - 1``
belong to AP m. Expectations are conditional on the large-scale drop and
average over small-scale fading and pilot noise only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .estimation import EstimationResult, complex_normal, estimate_channels, mmse_matrices, \
    synthesize_pilot_rx
from .pilots import PilotAssignment
from .rf import RfPlan, downlink_noise_variance, uplink_noise_variance

__all__ = [
    "SingularChannelError", "InsufficientSamplesError", "ZfFilters", "ExpectationSet",
    "DropContext", "build_context", "stack", "build_zf", "draw_equivalent_channels",
    "estimate_expectations", "dl_noise", "ul_noise", "sinr_dl", "sinr_ul", "rate",
    "fronthaul_dl_bound", "fronthaul_ul_bound",
]


class SingularChannelError(np.linalg.LinAlgError):
    """Estimated channel matrix is not of full column rank."""


class InsufficientSamplesError(RuntimeError):
    pass


def stack(G: np.ndarray) -> np.ndarray:
    """(M, L_A, K) -> (M*L_A, K)."""
    M, LA, K = G.shape
    return G.reshape(M * LA, K)


@dataclass(frozen=True)
class ZfFilters:
    G_hat: np.ndarray    # (M*L_A, K)
    W_d: np.ndarray      # (M*L_A, K), G_hat^T W_d = I
    W_u: np.ndarray      # (K, M*L_A) = W_d^T
    LA: int

    def block(self, m: int) -> np.ndarray:
        """Per-AP precoder W_{d,m} (L_A x K)."""
        return self.W_d[m * self.LA:(m + 1) * self.LA]


def build_zf(G_hat: np.ndarray, LA: int, rcond: float = 1e-10) -> ZfFilters:
    """``W_d = G_hat^* (G_hat^T G_hat^*)^{-1}`` and ``W_u = W_d^T``."""
    G_hat = np.asarray(G_hat)
    K = G_hat.shape[1]
    if K > G_hat.shape[0]:
        raise SingularChannelError("more users than stacked RF chains")
    s = np.linalg.svd(G_hat, compute_uv=False)
    if s[0] == 0 or s[-1] < rcond * s[0]:
        raise SingularChannelError("estimated channel is rank deficient")
    gram = G_hat.T @ G_hat.conj()
    W_d = np.linalg.solve(gram.T, G_hat.conj().T).T
    return ZfFilters(G_hat, W_d, W_d.T, LA)


@dataclass(frozen=True)
class DropContext:
    """Everything fixed over one large-scale interval."""
    config: SimConfig
    rf: RfPlan
    pilots: PilotAssignment
    estimation: EstimationResult
    sigma_u2: float
    sigma_d2: float
    B: np.ndarray            # (M, K, L_A, P) zero-padded equivalent path factors

    @property
    def M(self) -> int:
        return self.B.shape[0]

    @property
    def K(self) -> int:
        return self.B.shape[1]

    @property
    def LA(self) -> int:
        return self.B.shape[2]

    @property
    def tau_p_power(self) -> float:
        return self.config.tau_p * self.config.pilot_power_w


def build_context(rf: RfPlan, pilots: PilotAssignment, config: SimConfig) -> DropContext:
    M, K = rf.xi.shape
    LA = config.l_active
    width = max(b.shape[1] for row in rf.B for b in row)
    B = np.zeros((M, K, LA, width), dtype=complex)
    for m in range(M):
        for k in range(K):
            b = rf.B[m][k]
            B[m, k, :, :b.shape[1]] = b
    sigma_u2 = uplink_noise_variance(config.N, config)
    est = mmse_matrices(rf.R_rf, pilots, config.tau_p * config.pilot_power_w, sigma_u2)
    return DropContext(config, rf, pilots, est, sigma_u2, downlink_noise_variance(config), B)


def draw_equivalent_channels(ctx: DropContext, rng: np.random.Generator) -> np.ndarray:
    """One small-scale realization of all g_mk, shaped (M, L_A, K)."""
    alpha = complex_normal(rng, ctx.B.shape[:2] + ctx.B.shape[3:])
    return np.einsum("mkap,mkp->mak", ctx.B, alpha)


@dataclass
class ExpectationSet:
    varpi: np.ndarray        # (K, K) DL imperfect-CSI interference
    delta: np.ndarray        # (K, K) UL imperfect-CSI interference
    nu_u: np.ndarray         # (M, K)
    theta: np.ndarray        # (M, K) E||W_m^RF w_dmk||^2
    R_bb: np.ndarray         # (M, K, L_A, L_A)
    n_samples: int
    n_failed: int = 0
    varpi_se: np.ndarray | None = None
    samples: dict = field(default_factory=dict, repr=False)


def estimate_expectations(ctx: DropContext, n_mc: int, rng: np.random.Generator,
                          perfect_csi: bool = False, n_min: int | None = None,
                          keep_samples: bool = False,
                          noise_rng: np.random.Generator | None = None) -> ExpectationSet:
    """Sample averages of the rate and fronthaul expectation terms.

    Each realization draws fresh channels and pilot noise, forms the MMSE
    estimates (zeroed where the AP does not serve the MS), builds the ZF
    filters and accumulates the quadratic forms. Realizations with a
    rank-deficient estimate are skipped and counted. Pilot noise comes from
    ``noise_rng`` when given, otherwise from ``rng``.
    """
    M, K, LA = ctx.M, ctx.K, ctx.LA
    n_min = ctx.config.n_mc_min if n_min is None else n_min
    noise_rng = rng if noise_rng is None else noise_rng
    served = ctx.rf.served_mask                       # (M, K)
    WRF = ctx.rf.W                                    # (M, N, L_A)
    acc_varpi = np.zeros((K, K))
    acc_varpi2 = np.zeros((K, K))
    acc_delta = np.zeros((K, K))
    acc_nu = np.zeros((M, K))
    acc_theta = np.zeros((M, K))
    acc_rbb = np.zeros((M, K, LA, LA), dtype=complex)
    kept = {"G": [], "G_hat": [], "W_d": []} if keep_samples else {}
    ok = failed = 0
    for _ in range(n_mc):
        G = draw_equivalent_channels(ctx, rng)
        if perfect_csi:
            G_hat = G
        else:
            Y = synthesize_pilot_rx(G, ctx.pilots, ctx.tau_p_power, ctx.sigma_u2, noise_rng)
            G_hat = estimate_channels(Y, ctx.estimation.D, ctx.pilots)
            G_hat = G_hat * served[:, None, :]
        try:
            zf = build_zf(stack(G_hat), LA)
        except SingularChannelError:
            failed += 1
            continue
        ok += 1
        G_err = stack(G) - zf.G_hat
        cross = G_err.T @ zf.W_d                      # [k, k'] = g~_k^T w_k'
        p = np.abs(cross) ** 2
        acc_varpi += p
        acc_varpi2 += p ** 2
        acc_delta += np.abs(zf.W_u @ G_err) ** 2      # [k, k'] = w_k^T g~_k'
        Wb = zf.W_d.reshape(M, LA, K)
        acc_nu += np.sum(np.abs(Wb) ** 2, axis=1)
        acc_theta += np.sum(np.abs(WRF @ Wb) ** 2, axis=1)
        acc_rbb += np.einsum("mak,mbk->mkab", Wb, Wb.conj())
        if keep_samples:
            kept["G"].append(G)
            kept["G_hat"].append(G_hat)
            kept["W_d"].append(zf.W_d)
    if ok < n_min:
        raise InsufficientSamplesError(f"only {ok} of {n_mc} realizations usable")
    varpi = acc_varpi / ok
    var = np.maximum(acc_varpi2 / ok - varpi ** 2, 0.0)
    R_bb = acc_rbb / ok
    R_bb = 0.5 * (R_bb + np.conj(np.swapaxes(R_bb, -1, -2)))
    return ExpectationSet(varpi, acc_delta / ok, acc_nu / ok, acc_theta / ok, R_bb, ok, failed,
                          np.sqrt(var / ok), kept)


def dl_noise(sigma_q_d, R_rf: np.ndarray, sigma_d2: float) -> np.ndarray:
    """Per-MS DL effective noise ``sum_m sigma_q,dm^2 tr(R_mk^RF) + sigma_d^2``."""
    tr = np.real(np.trace(R_rf, axis1=-2, axis2=-1))  # (M, K)
    return np.asarray(sigma_q_d, dtype=float) @ tr + sigma_d2


def ul_noise(sigma_q_u, nu_u: np.ndarray, sigma_u2: float) -> np.ndarray:
    """Per-MS UL effective noise ``sum_m (sigma_q,um^2 + sigma_u^2) nu_mk``."""
    return (np.asarray(sigma_q_u, dtype=float) + sigma_u2) @ nu_u


def sinr_dl(upsilon, varpi, noise) -> np.ndarray:
    upsilon = np.asarray(upsilon, dtype=float)
    return upsilon / (np.asarray(varpi) @ upsilon + noise)


def sinr_ul(omega, delta, noise, P_u: float) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    return P_u * omega / (P_u * (np.asarray(delta) @ omega) + noise)


def rate(sinr):
    return np.log2(1.0 + np.asarray(sinr))


def _logdet2(A: np.ndarray) -> np.ndarray:
    sign, logabs = np.linalg.slogdet(A)
    return logabs / np.log(2.0)


def fronthaul_dl_bound(upsilon, R_bb: np.ndarray, sigma2) -> np.ndarray | float:
    """``log2 det(sum_k upsilon_k R_mk^BB / sigma^2 + I)``.

    ``R_bb`` is (K, L, L) for one AP or (M, K, L, L) with ``sigma2`` (M,).
    """
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 <= 0):
        raise ValueError("quantization noise variance must be positive")
    A = np.einsum("k,...kab->...ab", np.asarray(upsilon, dtype=float), R_bb)
    LA = R_bb.shape[-1]
    out = _logdet2(A / sigma2[..., None, None] + np.eye(LA))
    return float(out) if np.ndim(out) == 0 else out


def fronthaul_ul_bound(omega, R_rf: np.ndarray, sigma2, P_u: float,
                       sigma_u2: float) -> np.ndarray | float:
    """``log2 det(P_u sum_k omega_k R_mk^RF / sigma^2 + (sigma_u^2 / sigma^2 + 1) I)``."""
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 <= 0):
        raise ValueError("quantization noise variance must be positive")
    A = np.einsum("k,...kab->...ab", np.asarray(omega, dtype=float), R_rf)
    LA = R_rf.shape[-1]
    s = sigma2[..., None, None]
    out = _logdet2(P_u * A / s + (sigma_u2 / s + 1.0) * np.eye(LA))
    return float(out) if np.ndim(out) == 0 else out
