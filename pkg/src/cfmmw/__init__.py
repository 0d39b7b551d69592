"""Cell-free mmWave massive MIMO with hybrid beamforming and capacity-limited fronthaul."""
from .config import ConfigError, SimConfig, load_config, rng_streams
from .geometry import NetworkScenario, generate_scenario, scenario_from_positions
from .harness import CampaignReport, DropResult, prepare_drop, run_campaign, run_drop
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["SimConfig", "ConfigError", "load_config", "rng_streams", "NetworkScenario",
           "generate_scenario", "scenario_from_positions", "DropResult", "CampaignReport",
           "prepare_drop", "run_drop", "run_campaign", "BACKEND", "__version__"]
