"""Transient stability simulation with windowed power-series solutions."""
from .dt_core import Series, TrigPair
from .model import SystemModel, load_scenario
from .sas_engine import SimConfig, Trajectory, WindowSAS, build_window, evaluate_window, simulate

__version__ = "0.1.0"

__all__ = [
    "Series",
    "TrigPair",
    "SystemModel",
    "load_scenario",
    "SimConfig",
    "Trajectory",
    "WindowSAS",
    "build_window",
    "evaluate_window",
    "simulate",
]
