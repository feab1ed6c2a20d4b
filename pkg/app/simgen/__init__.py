"""Simulated factor-model panels with known treatment effects."""

from app.simgen.generate import SimulatedPanel, generate
from app.simgen.scenario import PRESETS, ScenarioConfig, load_scenario, save_scenario, tau_values, true_tau

__all__ = [
    "PRESETS",
    "ScenarioConfig",
    "SimulatedPanel",
    "generate",
    "load_scenario",
    "save_scenario",
    "tau_values",
    "true_tau",
]
