"""Experiment harness: YAML configs, presets, batch runs and CSV output."""

from .config import ConfigError, load_config, load_preset, preset_names
from .runner import compare, make_dataset, montecarlo, run_cell, run_experiment, simulate_experiment

__all__ = [
    "ConfigError", "load_config", "load_preset", "preset_names",
    "make_dataset", "run_cell", "run_experiment", "simulate_experiment", "compare", "montecarlo",
]
