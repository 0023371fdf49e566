"""Flux-plane sweeps, fixed-probe calibration maps and crosstalk inference."""

from .fluxmap import Axis, FluxMap
from .readout import (
    CrosstalkMatrix,
    NonDispersiveError,
    ReadoutModel,
    current_window,
    dispersive_resonator_frequency,
    fixed_probe_map,
    notch_s21,
)
from .sweep import SweepError, find_extremal_points, sweep_frequency

__all__ = [
    "Axis",
    "CrosstalkMatrix",
    "FluxMap",
    "NonDispersiveError",
    "ReadoutModel",
    "SweepError",
    "current_window",
    "dispersive_resonator_frequency",
    "find_extremal_points",
    "fixed_probe_map",
    "notch_s21",
    "sweep_frequency",
]
