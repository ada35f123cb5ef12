"""Hypercube states: analytic Wigner functions, metrics and experiment models."""

from subplanck._accel import backend, set_backend, set_threads
from subplanck.core import (
    GaussianReferenceState,
    GaussianTerm,
    GridSpec,
    PhaseSpaceState,
    WignerGrid,
    ZeroNormState,
    coherent_state,
    compose_displacements,
    default_grid,
    evaluate_grid,
)
from subplanck.hypercube import KrausSpec, build_state, distinct_centers, expand_branches

__all__ = [
    "GaussianReferenceState",
    "GaussianTerm",
    "GridSpec",
    "KrausSpec",
    "PhaseSpaceState",
    "WignerGrid",
    "ZeroNormState",
    "backend",
    "build_state",
    "coherent_state",
    "compose_displacements",
    "default_grid",
    "distinct_centers",
    "evaluate_grid",
    "expand_branches",
    "set_backend",
    "set_threads",
]

__version__ = "0.1.0"
