"""Desk-scale spectral laboratory for the stochastic fourth-order Schrodinger
equation on (0,1) with clamped boundary: Galerkin forward/backward solvers,
Carleman weight algebra and inequality harnesses, and HUM controllability."""

from .basis import SpectralBasis, beam_spectrum, eigenfunction_eval
from .backward import (duality_residual, solve_backward_deterministic,
                       solve_backward_regression)
from .forward import assemble_generator, solve_forward
from .noise import BrownianPath, increments_matrix, sample_path, sample_paths
from .weights import HatWeightSpec, SyntheticWeight, TildeWeightSpec, build_weight

__version__ = "0.1.0"

__all__ = [
    "SpectralBasis", "beam_spectrum", "eigenfunction_eval",
    "BrownianPath", "sample_path", "sample_paths", "increments_matrix",
    "assemble_generator", "solve_forward",
    "solve_backward_deterministic", "solve_backward_regression",
    "duality_residual",
    "HatWeightSpec", "TildeWeightSpec", "SyntheticWeight", "build_weight",
    "__version__",
]
