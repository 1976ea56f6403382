"""Simulation and channel estimation for dual-wideband sub-THz MIMO-OFDM."""
from .channel import SystemConfig, draw_realization, evolve, channel_matrices
from .codebook import GridSpec, build_dictionaries
from .training import Observation, TrainingConfig, observe, random_beams

__version__ = "0.1.0"

__all__ = ["SystemConfig", "draw_realization", "evolve", "channel_matrices", "GridSpec",
           "build_dictionaries", "Observation", "TrainingConfig", "observe", "random_beams"]
