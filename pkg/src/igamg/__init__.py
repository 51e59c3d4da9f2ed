"""Geometric multigrid for tensor-product B-spline discretizations of -Δu + u = f."""
from .model_problem import assemble_rhs, build_operator, exact_solution_error
from .multigrid import (
    SolverConfig,
    build_hierarchy,
    cycle,
    initial_guess,
    solve_mg,
    solve_pcg,
)
from .spline_core import assemble_mass, assemble_stiffness, make_space, prolongation
from .splitting import compute_splitting, subspace_gram
from .smoother import build_smoother

__all__ = [
    "SolverConfig",
    "assemble_mass",
    "assemble_rhs",
    "assemble_stiffness",
    "build_hierarchy",
    "build_operator",
    "build_smoother",
    "compute_splitting",
    "cycle",
    "exact_solution_error",
    "initial_guess",
    "make_space",
    "prolongation",
    "solve_mg",
    "solve_pcg",
    "subspace_gram",
]
