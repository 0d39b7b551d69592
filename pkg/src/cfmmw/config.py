"""Simulation configuration.

All quantities are SI (metres, hertz, watts) unless the field name says
``_db``. Channel-model constants default to a measurement-based
28 GHz urban fit.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

__all__ = ["SimConfig", "ConfigError", "load_config", "dump_config", "PROFILES",
           "rng_streams", "BOLTZMANN", "T0_KELVIN"]

BOLTZMANN = 1.380649e-23
T0_KELVIN = 290.0


class ConfigError(ValueError):
    """Raised for an invalid or inconsistent configuration."""


# section name used when a config is written to disk; loading accepts any nesting
_SECTIONS = {
    "network": ("M", "K", "N", "L", "area_side_m", "ap_height_m", "ms_height_m"),
    "radio": ("carrier_frequency_hz", "bandwidth_hz", "ap_power_w", "ms_power_w",
              "pilot_power_w", "tau_c", "tau_p", "fronthaul_dl", "fronthaul_ul"),
    "hardware": ("nf_ms_db", "nf_lna_db", "g_lna_db", "l_ps_db", "l_pc_in_db", "nf_rf_db"),
    "channel": ("a_out", "b_out", "a_los", "los_alpha_db", "los_beta", "los_shadow_std_db",
                "nlos_alpha_db", "nlos_beta", "nlos_shadow_std_db", "cluster_mean", "r_tau",
                "zeta_db", "azimuth_spread_mean_deg", "elevation_spread_mean_deg",
                "paths_per_cluster", "shadow_decorr_m", "shadow_delta"),
    "simulation": ("pilot_strategy", "n_mc", "n_mc_min", "seed"),
    "solver": ("sigma2_min", "bisection_rel_tol", "bcd_tol", "bcd_max_iter",
               "quant_rel_tol", "quant_max_iter"),
}


@dataclass(frozen=True)
class SimConfig:
    # network
    M: int = 100
    K: int = 20
    N: int = 64
    L: int = 8
    area_side_m: float = 200.0
    ap_height_m: float = 15.0
    ms_height_m: float = 1.65
    # radio
    carrier_frequency_hz: float = 28e9
    bandwidth_hz: float = 20e6
    ap_power_w: float = 0.2
    ms_power_w: float = 0.1
    pilot_power_w: float = 0.1
    tau_c: int = 200
    tau_p: int = 15
    fronthaul_dl: float = 64.0
    fronthaul_ul: float = 64.0
    # receive chain
    nf_ms_db: float = 9.0
    nf_lna_db: float = 1.6
    g_lna_db: float = 22.0
    l_ps_db: float = 3.0
    l_pc_in_db: float = 3.0
    nf_rf_db: float = 7.0
    # three-state clustered channel
    a_out: float = 1.0 / 30.0
    b_out: float = 5.2
    a_los: float = 1.0 / 67.1
    los_alpha_db: float = 61.4
    los_beta: float = 2.0
    los_shadow_std_db: float = 5.8
    nlos_alpha_db: float = 72.0
    nlos_beta: float = 2.92
    nlos_shadow_std_db: float = 8.7
    cluster_mean: float = 1.8
    r_tau: float = 2.8
    zeta_db: float = 4.0
    azimuth_spread_mean_deg: float = 10.2
    elevation_spread_mean_deg: float = 0.0
    paths_per_cluster: int = 10
    shadow_decorr_m: float = 50.0
    shadow_delta: float = 0.5
    # simulation
    pilot_strategy: str = "dcpa"
    n_mc: int = 100
    n_mc_min: int = 10
    seed: int = 0
    # solver
    sigma2_min: float = 1e-18
    bisection_rel_tol: float = 1e-4
    bcd_tol: float = 1e-3
    bcd_max_iter: int = 50
    quant_rel_tol: float = 1e-6
    quant_max_iter: int = 200

    def __post_init__(self):
        self.validate()

    @property
    def l_active(self) -> int:
        """Number of active RF chains per AP, min(K, L)."""
        return min(self.K, self.L)

    def validate(self) -> None:
        for name in ("M", "K", "N", "L", "tau_c", "tau_p", "paths_per_cluster"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.L > self.N:
            raise ConfigError("L must not exceed N")
        if self.tau_p > self.tau_c:
            raise ConfigError("tau_p must not exceed tau_c")
        for name in ("area_side_m", "bandwidth_hz", "ap_power_w", "ms_power_w",
                     "pilot_power_w", "fronthaul_dl", "fronthaul_ul", "carrier_frequency_hz",
                     "shadow_decorr_m", "sigma2_min"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0.0 <= self.shadow_delta <= 1.0:
            raise ConfigError("shadow_delta must lie in [0, 1]")
        if self.pilot_strategy not in ("rpa", "brpa", "dcpa"):
            raise ConfigError(f"unknown pilot strategy {self.pilot_strategy!r}")
        if self.n_mc < 1 or self.n_mc_min < 1:
            raise ConfigError("Monte Carlo counts must be >= 1")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self, nested: bool = False) -> dict[str, Any]:
        flat = dataclasses.asdict(self)
        if not nested:
            return flat
        return {sec: {k: flat[k] for k in keys} for sec, keys in _SECTIONS.items()}


# desk-scale defaults used by tests and the acceptance suite; "full" is the complete-scale profile
PROFILES: dict[str, dict[str, Any]] = {
    "full": {},
    "desk": dict(M=16, K=20, N=16, L=4, n_mc=50),
}


def _flatten(data: Mapping[str, Any], out: dict[str, Any]) -> dict[str, Any]:
    for key, value in data.items():
        if isinstance(value, Mapping):
            _flatten(value, out)
        else:
            if key in out:
                raise ConfigError(f"duplicate config key {key!r}")
            out[key] = value
    return out


def _coerce(values: dict[str, Any]) -> dict[str, Any]:
    known = {f.name: f for f in fields(SimConfig)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for key, value in values.items():
        kind = type(getattr(SimConfig, key))
        try:
            out[key] = kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return out


def load_config(path: str | Path | None = None, profile: str = "full",
                **overrides) -> SimConfig:
    """Build a config from a profile, an optional YAML file and keyword overrides.

    The file may be flat (``M: 16``) or grouped into sections
    (``network: {M: 16}``); section names are not significant.
    """
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    values = dict(PROFILES[profile])
    if path is not None:
        text = Path(path).read_text()
        data = yaml.safe_load(text) or {}
        if not isinstance(data, Mapping):
            raise ConfigError("config file must contain a mapping")
        values.update(_flatten(data, {}))
    values.update(overrides)
    return SimConfig(**_coerce(values))


def dump_config(config: SimConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(nested=True), sort_keys=False))


_PURPOSES = ("placement", "shadowing", "states", "clusters", "fading", "noise", "pilots")


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for each random purpose of one drop."""
    return {name: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
            for i, name in enumerate(_PURPOSES)}
