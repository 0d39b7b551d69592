"""Random network drops on a square area."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .config import SimConfig, rng_streams

__all__ = ["NetworkScenario", "generate_scenario", "scenario_from_positions"]


@dataclass(frozen=True)
class NetworkScenario:
    """AP and MS positions of one drop, with the derived distance matrices.

    Positions are (x, y, z) in metres; ``distances`` is M x K (3-D),
    ``ap_distances`` M x M and ``ms_distances`` K x K (horizontal).
    """
    ap_positions: np.ndarray
    ms_positions: np.ndarray
    distances: np.ndarray
    ap_distances: np.ndarray
    ms_distances: np.ndarray

    @property
    def M(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def K(self) -> int:
        return self.ms_positions.shape[0]


def scenario_from_positions(ap_positions, ms_positions) -> NetworkScenario:
    ap = np.array(ap_positions, dtype=float).reshape(-1, 3)
    ms = np.array(ms_positions, dtype=float).reshape(-1, 3)
    for arr in (ap, ms):
        arr.setflags(write=False)
    d = cdist(ap, ms)
    d_ap = cdist(ap[:, :2], ap[:, :2])
    d_ms = cdist(ms[:, :2], ms[:, :2])
    for arr in (d, d_ap, d_ms):
        arr.setflags(write=False)
    return NetworkScenario(ap, ms, d, d_ap, d_ms)


def generate_scenario(config: SimConfig, seed: int | None = None,
                      rng: np.random.Generator | None = None) -> NetworkScenario:
    """Drop M APs and K MSs uniformly on the D x D square at their configured heights."""
    config.validate()
    if rng is None:
        rng = rng_streams(config.seed if seed is None else seed)["placement"]
    side = config.area_side_m
    ap = np.column_stack([rng.uniform(0.0, side, size=(config.M, 2)),
                          np.full(config.M, config.ap_height_m)])
    ms = np.column_stack([rng.uniform(0.0, side, size=(config.K, 2)),
                          np.full(config.K, config.ms_height_m)])
    return scenario_from_positions(ap, ms)
