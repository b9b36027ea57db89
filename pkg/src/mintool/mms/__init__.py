"""Grid solver for stationary points of the discrete area, potentials and the compactness experiment."""

from .compactness import CompactnessConfig, CompactnessReport, compactness_experiment
from .fields import DiscreteField, Grid, read_field, write_field
from .potentials import build_potentials, inclusion_residual, ma_potential
from .presets import PRESETS, get_preset
from .solver import SolveReport, discrete_energy, el_residual, harmonic_extension, inner_variation_residual, solve_dirichlet

__all__ = [
    "CompactnessConfig",
    "CompactnessReport",
    "DiscreteField",
    "Grid",
    "PRESETS",
    "SolveReport",
    "build_potentials",
    "compactness_experiment",
    "discrete_energy",
    "el_residual",
    "get_preset",
    "harmonic_extension",
    "inclusion_residual",
    "inner_variation_residual",
    "ma_potential",
    "read_field",
    "solve_dirichlet",
    "write_field",
]
