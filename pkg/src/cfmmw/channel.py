"""Three-state clustered mmWave channel.

Each AP-MS link is in outage, LOS or NLOS. Non-outage links get a
log-distance path loss with spatially correlated shadowing and a set of
scattering clusters whose paths define the spatial covariance. The
covariance is kept in factored form ``R = F F^H`` with one column of ``F``
per propagation path, which is also what the small-scale sampler uses.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SimConfig
from .geometry import NetworkScenario

__all__ = [
    "LinkState", "ClusterGeometry", "LinkLargeScale", "ChannelDrop", "DomainError",
    "link_state_probs", "draw_link_states", "shadow_correlation", "draw_shadow_field",
    "path_loss_db", "draw_cluster_geometry", "array_response", "build_covariance",
    "path_factor", "draw_small_scale", "realize_channel", "dump_links_csv",
]


class DomainError(ValueError):
    """Argument outside the domain of a model formula."""


class LinkState(enum.IntEnum):
    OUTAGE = 0
    LOS = 1
    NLOS = 2


def link_state_probs(d, config: SimConfig):
    """Outage, LOS and NLOS probabilities at distance ``d`` (metres).

    Works elementwise on arrays; returns a tuple ``(p_out, p_los, p_nlos)``.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    p_out = np.maximum(0.0, 1.0 - np.exp(-config.a_out * d + config.b_out))
    p_los = (1.0 - p_out) * np.exp(-config.a_los * d)
    p_nlos = 1.0 - p_out - p_los
    return p_out, p_los, p_nlos


def draw_link_states(distances, config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    p_out, p_los, _ = link_state_probs(distances, config)
    u = rng.random(np.shape(distances))
    states = np.full(np.shape(distances), LinkState.NLOS, dtype=np.int8)
    states[u < p_out + p_los] = LinkState.LOS
    states[u < p_out] = LinkState.OUTAGE
    return states


def shadow_correlation(distances, decorr_m: float) -> np.ndarray:
    return np.power(2.0, -np.asarray(distances, dtype=float) / decorr_m)


def _correlated_normal(corr: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # eigh instead of cholesky: co-located points make corr singular
    w, v = np.linalg.eigh(corr)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    return root @ rng.standard_normal(corr.shape[0])


def draw_shadow_field(scenario: NetworkScenario, config: SimConfig,
                      rng: np.random.Generator, states=None) -> np.ndarray:
    """Two-component correlated shadowing, M x K.

    ``z_mk = sqrt(delta) a_m + sqrt(1 - delta) b_k`` where ``a`` (AP side)
    and ``b`` (MS side) are unit-variance Gaussian fields with correlation
    ``2**(-distance / d_decorr)``. With ``states`` given the field is scaled
    by the per-state standard deviation (dB) and zeroed on outage links;
    otherwise the unit-variance field is returned.
    """
    a = _correlated_normal(shadow_correlation(scenario.ap_distances, config.shadow_decorr_m), rng)
    b = _correlated_normal(shadow_correlation(scenario.ms_distances, config.shadow_decorr_m), rng)
    delta = config.shadow_delta
    z = np.sqrt(delta) * a[:, None] + np.sqrt(1.0 - delta) * b[None, :]
    if states is None:
        return z
    states = np.asarray(states)
    sigma = np.where(states == LinkState.LOS, config.los_shadow_std_db,
                     np.where(states == LinkState.NLOS, config.nlos_shadow_std_db, 0.0))
    return sigma * z


def path_loss_db(d, state, chi, config: SimConfig):
    """Log-distance loss ``alpha + 10 beta log10(d) + chi``; ``inf`` for outage links."""
    d = np.asarray(d, dtype=float)
    state = np.asarray(state)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    alpha = np.where(state == LinkState.LOS, config.los_alpha_db, config.nlos_alpha_db)
    beta = np.where(state == LinkState.LOS, config.los_beta, config.nlos_beta)
    pl = alpha + 10.0 * beta * np.log10(d) + chi
    pl = np.where(state == LinkState.OUTAGE, np.inf, pl)
    return float(pl) if pl.ndim == 0 else pl


@dataclass(frozen=True)
class ClusterGeometry:
    """Clusters of one link. Angle arrays are (C, P) in radians."""
    gamma: np.ndarray
    azimuth_center: np.ndarray
    elevation_center: np.ndarray
    azimuth_spread: np.ndarray
    elevation_spread: np.ndarray
    azimuth: np.ndarray
    elevation: np.ndarray

    @property
    def n_clusters(self) -> int:
        return self.gamma.size

    @property
    def paths_per_cluster(self) -> int:
        return self.azimuth.shape[1]


def _wrap(angle):
    return (np.asarray(angle) + np.pi) % (2.0 * np.pi) - np.pi


def draw_cluster_geometry(config: SimConfig, rng: np.random.Generator,
                          los_elevation: float = 0.0, N: int | None = None) -> ClusterGeometry:
    N = config.N if N is None else N
    P = config.paths_per_cluster
    C = max(int(rng.poisson(config.cluster_mean)), 1)
    u = rng.random(C)
    z = rng.normal(0.0, config.zeta_db, C)
    gamma_raw = u ** (config.r_tau - 1.0) * 10.0 ** (z / 10.0)
    gamma = N * gamma_raw / (P * gamma_raw.sum())
    az_c = rng.uniform(-np.pi, np.pi, C)
    el_c = np.full(C, los_elevation)
    az_s = rng.exponential(np.deg2rad(config.azimuth_spread_mean_deg), C) \
        if config.azimuth_spread_mean_deg > 0 else np.zeros(C)
    el_s = rng.exponential(np.deg2rad(config.elevation_spread_mean_deg), C) \
        if config.elevation_spread_mean_deg > 0 else np.zeros(C)
    az = _wrap(az_c[:, None] + az_s[:, None] * rng.standard_normal((C, P)))
    el = _wrap(el_c[:, None] + el_s[:, None] * rng.standard_normal((C, P)))
    return ClusterGeometry(gamma, az_c, el_c, az_s, el_s, az, el)


def array_response(theta, phi=None, N: int = 1) -> np.ndarray:
    """Half-wavelength ULA steering vector(s), unit norm.

    ``theta`` may be an array of azimuths; the result is then N x len(theta).
    The elevation ``phi`` has no effect on a linear array.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    theta = np.asarray(theta, dtype=float)
    n = np.arange(N)
    if theta.ndim == 0:
        return np.exp(1j * np.pi * n * np.sin(theta)) / np.sqrt(N)
    return np.exp(1j * np.pi * np.outer(n, np.sin(theta.ravel()))) / np.sqrt(N)


def path_factor(clusters: ClusterGeometry, pl_db: float, N: int) -> np.ndarray:
    """N x (C*P) matrix F with R = F F^H and h = F alpha, alpha ~ CN(0, I)."""
    if not np.isfinite(pl_db):
        return np.zeros((N, 1), dtype=complex)
    gain = 10.0 ** (-pl_db / 10.0)
    A = array_response(clusters.azimuth.ravel(), clusters.elevation.ravel(), N)
    w = np.repeat(clusters.gamma, clusters.paths_per_cluster) * gain
    return A * np.sqrt(w)[None, :]


def build_covariance(clusters: ClusterGeometry | None, pl_db: float, N: int) -> np.ndarray:
    """Spatial covariance of one link; zero for outage (``clusters`` None or infinite loss)."""
    if clusters is None or not np.isfinite(pl_db):
        return np.zeros((N, N), dtype=complex)
    F = path_factor(clusters, pl_db, N)
    R = F @ F.conj().T
    return 0.5 * (R + R.conj().T)


def draw_small_scale(factor: np.ndarray, rng: np.random.Generator, size: int | None = None):
    """Channel vector(s) h = F alpha. With ``size`` returns N x size."""
    n_paths = factor.shape[1]
    shape = (n_paths,) if size is None else (n_paths, size)
    alpha = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return factor @ alpha


@dataclass(frozen=True)
class LinkLargeScale:
    state: LinkState
    pl_db: float
    shadow_db: float
    clusters: ClusterGeometry | None
    factor: np.ndarray

    @property
    def covariance(self) -> np.ndarray:
        F = self.factor
        return F @ F.conj().T


@dataclass(frozen=True)
class ChannelDrop:
    """Large-scale channel of a whole drop."""
    states: np.ndarray
    shadow_db: np.ndarray
    pl_db: np.ndarray
    links: tuple

    @property
    def shape(self):
        return self.states.shape

    def link(self, m: int, k: int) -> LinkLargeScale:
        return self.links[m][k]

    def covariance(self, m: int, k: int) -> np.ndarray:
        return self.links[m][k].covariance


def realize_channel(scenario: NetworkScenario, config: SimConfig, streams: dict) -> ChannelDrop:
    """Link states, shadowing, path loss and cluster geometry for every link."""
    states = draw_link_states(scenario.distances, config, streams["states"])
    shadow = draw_shadow_field(scenario, config, streams["shadowing"], states)
    pl = path_loss_db(scenario.distances, states, shadow, config)
    rng = streams["clusters"]
    N = config.N
    links = []
    for m in range(scenario.M):
        row = []
        for k in range(scenario.K):
            if states[m, k] == LinkState.OUTAGE:
                row.append(LinkLargeScale(LinkState.OUTAGE, np.inf, 0.0, None,
                                          np.zeros((N, 1), dtype=complex)))
                continue
            dz = scenario.ms_positions[k, 2] - scenario.ap_positions[m, 2]
            dxy = np.hypot(*(scenario.ms_positions[k, :2] - scenario.ap_positions[m, :2]))
            geom = draw_cluster_geometry(config, rng, los_elevation=float(np.arctan2(dz, dxy)))
            row.append(LinkLargeScale(LinkState(int(states[m, k])), float(pl[m, k]),
                                      float(shadow[m, k]), geom, path_factor(geom, pl[m, k], N)))
        links.append(tuple(row))
    return ChannelDrop(states, shadow, pl, tuple(links))


def dump_links_csv(drop: ChannelDrop, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ap", "ms", "state", "pl_db", "shadow_db", "trace_r"])
        M, K = drop.shape
        for m in range(M):
            for k in range(K):
                link = drop.link(m, k)
                tr = float(np.sum(np.abs(link.factor) ** 2))
                writer.writerow([m, k, link.state.name, f"{link.pl_db:.9g}",
                                 f"{link.shadow_db:.9g}", f"{tr:.9g}"])
