"""Spectra, readout calibration, relaxation limits and defect spectroscopy of
gap-tunable capacitively shunted flux qubits."""

__version__ = "0.1.0"

from .circuit import DeviceParams, FluxBias, build_hamiltonian, load_preset, potential
from .eigensolver import SolveOptions, SolverError, SpectrumResult, qubit_frequency, solve_spectrum

__all__ = [
    "DeviceParams",
    "FluxBias",
    "SolveOptions",
    "SolverError",
    "SpectrumResult",
    "__version__",
    "build_hamiltonian",
    "load_preset",
    "potential",
    "qubit_frequency",
    "solve_spectrum",
]
