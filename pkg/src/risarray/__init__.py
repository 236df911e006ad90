"""Simulation of RIS-assisted massive-MIMO downlink with an active array fed by a reflecting surface."""
from .config import PRESETS, ScenarioConfig, load_scenario, preset, save_scenario
from .exceptions import RisArrayError

__all__ = ["PRESETS", "RisArrayError", "ScenarioConfig", "load_scenario", "preset", "save_scenario"]
__version__ = "0.1.0"
