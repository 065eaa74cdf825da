"""Pseudo-spectral simulation of dissipative active scalar equations.

    d_t theta + kappa (-Delta)^gamma theta + u . grad theta = 0,   u = P[theta],

on periodic boxes, with Fourier-multiplier velocity couplings P, together
with the diagnostics and studies used to check decay rates, the maximum
principle, scaling covariance and symmetry preservation.
"""
from .coupling import CouplingSpec, check_admissibility, evaluate_symbol, velocity
from .diagnostics import fit_decay, kato_weights, lq_norm, sobolev_norm, symmetry_defect
from .evolve import SolverConfig, evolve, picard_iterate, step
from .spectral import Grid, ScalarField, VectorField, make_grid

__version__ = "0.1.0"

__all__ = [
    "CouplingSpec", "Grid", "ScalarField", "SolverConfig", "VectorField",
    "check_admissibility", "evaluate_symbol", "evolve", "fit_decay", "kato_weights",
    "lq_norm", "make_grid", "picard_iterate", "sobolev_norm", "step", "symmetry_defect",
    "velocity",
]
