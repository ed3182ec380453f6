"""Numerical laboratory for Dirichlet forms on scale-irregular Sierpinski gaskets."""

from .geometry import CellMeasure, GasketGraph, GasketSpec, build_graph, count_s, enumerate_s, uniform_cell_measure
from .forms import (
    QuadraticForm,
    ScaledFormParams,
    assemble_form,
    base_form,
    cell_energy_measure,
    dirichlet_solve,
    harmonic_extend,
    resistance_scale,
    trace_form,
    vertex_energy_measure,
)
from .scaling import ScalingProfile, classify_regime, phi_eval, psi_eval, verify_regularity, walk_dimension

__version__ = "0.1.0"

__all__ = [
    "CellMeasure",
    "GasketGraph",
    "GasketSpec",
    "QuadraticForm",
    "ScaledFormParams",
    "ScalingProfile",
    "assemble_form",
    "base_form",
    "build_graph",
    "cell_energy_measure",
    "classify_regime",
    "count_s",
    "dirichlet_solve",
    "enumerate_s",
    "harmonic_extend",
    "phi_eval",
    "psi_eval",
    "resistance_scale",
    "trace_form",
    "uniform_cell_measure",
    "verify_regularity",
    "vertex_energy_measure",
    "walk_dimension",
]
