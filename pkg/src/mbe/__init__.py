"""Simulation of the slope-selecting epitaxial growth equation

    h_t + nu lap^2 h + div J(grad h) = 0

on rectangles with no-flux or periodic boundaries.
"""
from .diagnostics import (DiagnosticsRecord, StabilityReport, coarsening_length,
                          energy, mass, slope_statistics, stability_experiment)
from .flux import FluxKind, FluxModel, NoSlopeSelection, current, selected_slopes
from .grid import BC, Grid, HeightField, SlopeField, read_snapshot, write_snapshot
from .solver import (NoConvergence, NonFiniteError, Scheme, SimulationState,
                     SolverConfig, StabilityViolation, rhs, run, run_constructive)

__version__ = "0.1.0"

__all__ = [
    "BC", "Grid", "HeightField", "SlopeField", "read_snapshot", "write_snapshot",
    "FluxKind", "FluxModel", "NoSlopeSelection", "current", "selected_slopes",
    "Scheme", "SolverConfig", "SimulationState", "rhs", "run", "run_constructive",
    "NoConvergence", "NonFiniteError", "StabilityViolation",
    "DiagnosticsRecord", "StabilityReport", "mass", "energy", "slope_statistics",
    "coarsening_length", "stability_experiment",
]
