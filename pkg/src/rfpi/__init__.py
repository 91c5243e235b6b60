"""Numerical lab for weighted time-sliced path integrals under continuous position measurement."""

from .errors import RFPIError
from .grid import Grid, SpinorWaveFunction, Subdivision, WaveFunction, gaussian_packet
from .propagator import PropagatorConfig, one_step, time_sliced

__all__ = [
    "RFPIError",
    "Grid",
    "WaveFunction",
    "SpinorWaveFunction",
    "Subdivision",
    "gaussian_packet",
    "PropagatorConfig",
    "one_step",
    "time_sliced",
]

__version__ = "0.1.0"
