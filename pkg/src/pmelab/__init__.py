"""Numerical laboratory for the porous medium equation on flat tori.

The package simulates the degenerate diffusion equation u_t = lap(u^gamma)
(and its drift-weighted variant) on periodic uniform grids and verifies,
to discretization tolerance, the entropy monotonicity formulas, pointwise
gradient (Harnack) estimates, integrated Harnack inequalities, Laplacian
estimates and warped-product identities that hold for smooth positive
solutions.
"""

__version__ = "0.1.0"

from .torus import Torus, build_torus
from .solver import SolverState, Trajectory, run, step

__all__ = [
    "Torus",
    "build_torus",
    "SolverState",
    "Trajectory",
    "run",
    "step",
    "__version__",
]
