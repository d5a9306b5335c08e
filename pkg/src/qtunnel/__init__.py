"""Tunneling decay of a spin-orbit-coupled particle after a potential quench.

A bound state of a hard-wall step is released at t = 0 into a barrier
geometry; the package expands the gauged initial spinor over delta-normalized
continuum states, evolves it by oscillatory spectral quadrature, restores the
lab frame, and extracts spin observables, arrival-peak structure, and the
tunneling-length parameter, cross-validated by an independent grid solver.
"""

__version__ = "0.1.0"

from .model import (InitialState, PotentialSpec, SimulationConfig, SOCoupling,
                    Stage, load_config, validate)
from .eigensolver import (BoundState, ContinuumState, Regime, group_delay,
                          solve_bound_states, solve_continuum, transmission)
from .spectral import (OverlapKernel, SpectralAmplitudes, compute_coefficients,
                       gauged_initial, reconstruct_t0)
from .evolve import (Frame, ObservableRecord, Simulation, SpinorSample,
                     evolve_gauged, observables, to_lab)
from .analysis import (PeakReport, TunnelingLengthResult, classical_precession,
                       delta_t, peak_report, py_weak, transparency_scan,
                       tunneling_length)

__all__ = [
    "BoundState", "ContinuumState", "Frame", "InitialState", "ObservableRecord",
    "OverlapKernel", "PeakReport", "PotentialSpec", "Regime", "SOCoupling",
    "SimulationConfig", "Simulation", "SpectralAmplitudes", "SpinorSample",
    "Stage", "TunnelingLengthResult", "classical_precession",
    "compute_coefficients", "delta_t", "evolve_gauged", "gauged_initial",
    "group_delay", "load_config", "observables", "peak_report", "py_weak",
    "reconstruct_t0", "solve_bound_states", "solve_continuum", "to_lab",
    "transmission", "transparency_scan", "tunneling_length", "validate",
]
