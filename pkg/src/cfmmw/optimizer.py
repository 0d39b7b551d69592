"""Max-min power control with fronthaul quantization, DL and UL.

The quantization blocks are single-variable root solves on strictly
decreasing log-det maps. The power blocks are solved by bisection on the
common SINR target ``t``: for a nonnegative coupling matrix the smallest
power vector reaching ``t`` for every user is the fixed point
``(I - t Pi) p = t s``, so ``t`` is achievable iff that point exists
(``t rho(Pi) < 1``) and satisfies the power constraints.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .rates import ExpectationSet, dl_noise, fronthaul_dl_bound, fronthaul_ul_bound, rate, \
    sinr_dl, sinr_ul, ul_noise

__all__ = ["Status", "SolverError", "InfeasibleError", "AllocationState", "solve_quant_dl",
           "solve_quant_ul", "maxmin_power_dl", "maxmin_power_ul", "bcd_dl", "bcd_ul",
           "initial_dl_powers", "fronthaul_residual"]

log = logging.getLogger(__name__)

LN2 = np.log(2.0)


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    INFEASIBLE = "infeasible"


class SolverError(RuntimeError):
    pass


class InfeasibleError(SolverError):
    pass


# ---------------------------------------------------------------- quantization

def _eigs(A: np.ndarray) -> np.ndarray:
    return np.clip(np.linalg.eigvalsh(0.5 * (A + A.conj().T)), 0.0, None)


def _solve_decreasing(bits, capacity: float, lo: float, hi: float, rel_tol: float,
                      max_iter: int) -> float:
    """Root in sigma^2 of bits(sigma^2) = capacity, bits strictly decreasing."""
    f = lambda x: bits(np.exp(x)) - capacity
    a, b = np.log(lo), np.log(hi)
    if f(b) > 0:
        raise SolverError("upper bracket does not bound the root")
    x = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=max_iter)
    # relative residual on the determinant, 2^{f} - 1
    if abs(np.expm1(f(x) * LN2)) > rel_tol:
        raise SolverError("quantization root did not reach tolerance")
    return float(np.exp(x))


def solve_quant_dl(upsilon, R_bb: np.ndarray, capacity: float, sigma2_min: float = 1e-18,
                   rel_tol: float = 1e-6, max_iter: int = 200) -> float:
    """Quantization noise making one AP's DL fronthaul bound meet ``capacity``.

    ``R_bb`` is (K, L, L). Returns ``sigma2_min`` when the bound stays below
    capacity even at the floor (including all-zero powers).
    """
    if capacity <= 0:
        raise InfeasibleError("fronthaul capacity must be positive")
    A = np.einsum("k,kab->ab", np.asarray(upsilon, dtype=float), R_bb)
    lam = _eigs(A)
    if not np.any(lam > 0):
        return sigma2_min
    bits = lambda s2: float(np.sum(np.log1p(lam / s2)) / LN2)
    if bits(sigma2_min) <= capacity:
        return sigma2_min
    # log2(1+x) <= x/ln2 makes this an upper bracket
    hi = max(lam.sum() / (capacity * LN2), sigma2_min) * 2.0
    return _solve_decreasing(bits, capacity, sigma2_min, hi, rel_tol, max_iter)


def solve_quant_ul(omega, R_rf: np.ndarray, P_u: float, sigma_u2: float, capacity: float,
                   sigma2_min: float = 1e-18, rel_tol: float = 1e-6,
                   max_iter: int = 200) -> float:
    """UL counterpart: root of ``det(P_u A / s + (1 + sigma_u^2 / s) I) = 2^C``."""
    if capacity <= 0:
        raise InfeasibleError("fronthaul capacity must be positive")
    A = np.einsum("k,kab->ab", np.asarray(omega, dtype=float), R_rf)
    c = P_u * _eigs(A) + sigma_u2
    if not np.any(c > 0):
        return sigma2_min
    bits = lambda s2: float(np.sum(np.log1p(c / s2)) / LN2)
    if bits(sigma2_min) <= capacity:
        return sigma2_min
    hi = max(c.sum() / (capacity * LN2), sigma2_min) * 2.0
    return _solve_decreasing(bits, capacity, sigma2_min, hi, rel_tol, max_iter)


# ----------------------------------------------------------------- power control

def _spectral_radius(P: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(P)))) if P.size else 0.0


def _bisect(feasible, hi: float, rel_tol: float, max_iter: int = 200):
    lo, best = 0.0, None
    for _ in range(max_iter):
        if hi - lo <= rel_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        p = feasible(mid)
        if p is None:
            hi = mid
        else:
            lo, best = mid, p
    return lo, best


def _fixed_point(coupling: np.ndarray, noise: np.ndarray, t: float):
    K = noise.size
    p = np.linalg.solve(np.eye(K) - t * coupling, t * noise)
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        return None
    return p


def maxmin_power_dl(varpi: np.ndarray, theta: np.ndarray, budget, noise,
                    rel_tol: float = 1e-4):
    """Max-min DL SINR subject to ``theta^T upsilon <= budget`` per AP.

    ``theta`` is (M, K), ``budget`` (M,), ``noise`` (K,). Returns
    ``(upsilon, min_sinr)``. The bisection point is finally scaled up until
    the tightest AP constraint is met with equality.
    """
    varpi = np.asarray(varpi, dtype=float)
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    budget = np.atleast_1d(np.asarray(budget, dtype=float))
    noise = np.asarray(noise, dtype=float)
    if np.any(budget <= 0):
        raise InfeasibleError("no power budget left after quantization noise")
    rho = _spectral_radius(varpi)
    with np.errstate(divide="ignore"):
        cap = np.min(np.where(theta > 0, budget[:, None] / theta, np.inf), axis=0)
    hi = float(np.min(cap / noise))
    if rho > 0:
        hi = min(hi, 1.0 / rho)
    if not np.isfinite(hi):
        raise SolverError("unbounded max-min problem")

    def feasible(t):
        p = _fixed_point(varpi, noise, t)
        if p is None or np.any(theta @ p > budget * (1 + 1e-12)):
            return None
        return p

    t, p = _bisect(feasible, hi, rel_tol)
    if p is None:
        return np.zeros_like(noise), 0.0
    load = theta @ p
    scale = np.min(np.where(load > 0, budget / np.where(load > 0, load, 1), np.inf))
    if np.isfinite(scale) and scale > 1:
        p = p * scale
    return p, float(np.min(sinr_dl(p, varpi, noise)))


def maxmin_power_ul(delta: np.ndarray, noise, P_u: float, rel_tol: float = 1e-4):
    """Max-min UL SINR with ``0 <= omega <= 1``. Returns ``(omega, min_sinr)``."""
    delta = np.asarray(delta, dtype=float)
    noise = np.asarray(noise, dtype=float)
    rho = _spectral_radius(delta)
    hi = float(np.min(P_u / noise))
    if rho > 0:
        hi = min(hi, 1.0 / rho)
    s = noise / P_u

    def feasible(t):
        w = _fixed_point(delta, s, t)
        if w is None or np.any(w > 1 + 1e-12):
            return None
        return w

    t, w = _bisect(feasible, hi, rel_tol)
    if w is None:
        return np.zeros_like(noise), 0.0
    w = np.minimum(w / np.max(w), 1.0)
    return w, float(np.min(sinr_ul(w, delta, noise, P_u)))


# ------------------------------------------------------------------------ BCD

@dataclass
class AllocationState:
    powers: np.ndarray           # upsilon (W) for DL, omega in [0, 1] for UL
    sigma2_q: np.ndarray         # (M,)
    sinr: np.ndarray
    min_rate: float
    status: Status
    iterations: int
    trace: list = field(default_factory=list)
    fronthaul_bits: np.ndarray | None = None
    power_used: np.ndarray | None = None

    @property
    def rates(self) -> np.ndarray:
        return rate(self.sinr)


def fronthaul_residual(bits: np.ndarray, capacity: float, sigma2: np.ndarray,
                       sigma2_min: float) -> np.ndarray:
    """Relative determinant residual ``|2^{bits - C} - 1|``; zero where the floor is active."""
    res = np.abs(np.expm1((np.asarray(bits) - capacity) * LN2))
    return np.where(np.asarray(sigma2) <= sigma2_min * (1 + 1e-9), 0.0, res)


def initial_dl_powers(theta: np.ndarray, P_max: float) -> np.ndarray:
    """Uniform powers set by the most loaded AP constraint."""
    return np.full(theta.shape[1], P_max / np.max(theta.sum(axis=1)))


def _quant_dl_all(p, E: ExpectationSet, capacity, sigma2_min, rel_tol):
    return np.array([solve_quant_dl(p, E.R_bb[m], capacity, sigma2_min, rel_tol)
                     for m in range(E.R_bb.shape[0])])


def _consistent_dl(p, E, R_rf, sigma_d2, P_max, capacity, LA, N, sigma2_min, rel_tol):
    """Scale ``p`` so that (p, F_d(p)) meets the power budget; both constraints then hold.

    ``F_d`` is homogeneous in the powers away from the floor, so one rescale
    is normally enough; a few passes cover the floored case. Returns None
    when no scaling works.
    """
    if sigma2_min * LA * N >= P_max:
        return None
    scale = 1.0
    for _ in range(60):
        s2 = _quant_dl_all(scale * p, E, capacity, sigma2_min, rel_tol)
        load = E.theta @ (scale * p) + s2 * LA * N
        r = float(np.max(load / P_max))
        if r <= 1.0 + 1e-12:
            break
        scale /= r * (1.0 + 1e-12)
    else:
        return None
    q = scale * p
    noise = dl_noise(s2, R_rf, sigma_d2)
    sinr = sinr_dl(q, E.varpi, noise)
    return q, s2, sinr, fronthaul_dl_bound(q, E.R_bb, s2), load


def bcd_dl(E: ExpectationSet, R_rf: np.ndarray, sigma_d2: float, P_max: float,
           capacity: float, LA: int, N: int, upsilon0=None, sigma2_min: float = 1e-18,
           tol: float = 1e-3, max_iter: int = 50, bisection_rel_tol: float = 1e-4,
           quant_rel_tol: float = 1e-6) -> AllocationState:
    """Alternate the DL quantization and power blocks until the min-rate settles.

    Every power iterate is scored at its own quantization noise (fronthaul
    met with equality), scaled down if that leaves the power budget short.
    The best scored point is returned; a given ``upsilon0`` is scored too.
    """
    K = E.theta.shape[1]
    p = initial_dl_powers(E.theta, P_max) if upsilon0 is None else np.asarray(upsilon0, float)
    args = (E, R_rf, sigma_d2, P_max, capacity, LA, N, sigma2_min, quant_rel_tol)
    best, prev_rate, trace = None, None, []
    status = Status.MAX_ITERS
    start = _consistent_dl(p, *args) if upsilon0 is not None and np.any(p > 0) else None
    if start is not None:
        q, s2, sinr, bits, load = start
        best = AllocationState(q, s2, sinr, float(np.min(rate(sinr))), status, 0, trace, bits,
                               load)
    for it in range(1, max_iter + 1):
        s2 = _quant_dl_all(p, E, capacity, sigma2_min, quant_rel_tol)
        budget = P_max - s2 * LA * N
        if np.any(budget <= 0):
            if best is None:
                return AllocationState(np.zeros(K), s2, np.zeros(K), 0.0, Status.INFEASIBLE, it,
                                       trace)
            break
        p_new, _ = maxmin_power_dl(E.varpi, E.theta, budget, dl_noise(s2, R_rf, sigma_d2),
                                   bisection_rel_tol)
        scored = _consistent_dl(p_new, *args)
        if scored is None:
            break
        q, s2c, sinr, bits, load = scored
        min_rate = float(np.min(rate(sinr)))
        trace.append(min_rate)
        state = AllocationState(q, s2c, sinr, min_rate, Status.MAX_ITERS, it, trace, bits, load)
        if best is None or min_rate > best.min_rate:
            best = state
        if prev_rate is not None and abs(min_rate - prev_rate) <= tol * max(min_rate, 1e-300):
            status = Status.CONVERGED
            break
        prev_rate, p = min_rate, p_new
    if best is None:
        return AllocationState(np.zeros(K), s2, np.zeros(K), 0.0, Status.INFEASIBLE,
                               len(trace), trace)
    best.status = status
    best.iterations = len(trace)
    best.trace = trace
    return best


def bcd_ul(E: ExpectationSet, R_rf: np.ndarray, sigma_u2: float, P_u: float, capacity: float,
           omega0=None, sigma2_min: float = 1e-18, tol: float = 1e-3, max_iter: int = 50,
           bisection_rel_tol: float = 1e-4, quant_rel_tol: float = 1e-6) -> AllocationState:
    """UL counterpart of :func:`bcd_dl` over omega in [0, 1]; no rescaling is needed."""
    M = E.nu_u.shape[0]
    w = np.ones(E.nu_u.shape[1]) if omega0 is None else np.asarray(omega0, dtype=float)

    def score(v):
        s2 = np.array([solve_quant_ul(v, R_rf[m], P_u, sigma_u2, capacity, sigma2_min,
                                      quant_rel_tol) for m in range(M)])
        sinr = sinr_ul(v, E.delta, ul_noise(s2, E.nu_u, sigma_u2), P_u)
        return s2, sinr, fronthaul_ul_bound(v, R_rf, s2, P_u, sigma_u2)

    best, prev_rate, trace = None, None, []
    status = Status.MAX_ITERS
    if omega0 is not None and np.all((w >= 0) & (w <= 1)):
        s2, sinr, bits = score(w)
        best = AllocationState(w.copy(), s2, sinr, float(np.min(rate(sinr))), status, 0, trace,
                               bits)
    s2 = score(w)[0]
    for it in range(1, max_iter + 1):
        w_new, _ = maxmin_power_ul(E.delta, ul_noise(s2, E.nu_u, sigma_u2), P_u,
                                   bisection_rel_tol)
        s2, sinr, bits = score(w_new)
        min_rate = float(np.min(rate(sinr)))
        trace.append(min_rate)
        state = AllocationState(w_new, s2, sinr, min_rate, Status.MAX_ITERS, it, trace, bits)
        if best is None or min_rate > best.min_rate:
            best = state
        if prev_rate is not None and abs(min_rate - prev_rate) <= tol * max(min_rate, 1e-300):
            status = Status.CONVERGED
            break
        prev_rate = min_rate
    best.status = status
    best.iterations = len(trace)
    best.trace = trace
    return best
