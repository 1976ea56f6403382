"""Experiment specification, metrics, sweeps and the command line."""
from .metrics import nmse, spectral_efficiency
from .runner import run_experiment, simulate_trial, summarize
from .spec import ConfigError, ExperimentSpec, load_spec, spec_from_dict

__all__ = ["nmse", "spectral_efficiency", "run_experiment", "simulate_trial", "summarize",
           "ConfigError", "ExperimentSpec", "load_spec", "spec_from_dict"]
