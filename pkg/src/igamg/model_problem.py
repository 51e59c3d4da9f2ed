"""The model problem -Δu + u = f on (0,1)^d with natural boundary conditions.

The load is ``f(x) = d π² Π_j sin(π(x_j + 1/2)) = d π² Π_j cos(π x_j)``,
whose exact solution is ``u*(x) = d π² / (d π² + 1) Π_j cos(π x_j)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spline_core import (
    SplineSpace,
    assemble_mass,
    assemble_stiffness,
    collocation_matrix,
    eval_basis_many,
    gauss_points,
)
from .tensor_linalg import TensorOperator, kron_apply

__all__ = [
    "ModelProblem",
    "build_operator",
    "build_mass_operator",
    "assemble_rhs",
    "exact_solution",
    "exact_solution_error",
    "make_problem",
]


def build_operator(space: SplineSpace, d: int, M=None, K=None) -> TensorOperator:
    """``A = Σ_j M ⊗ .. ⊗ K (slot j) ⊗ .. ⊗ M + M ⊗ .. ⊗ M`` (d + 1 terms)."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    M = assemble_mass(space) if M is None else M
    K = assemble_stiffness(space) if K is None else K
    terms = [tuple(K if i == j else M for i in range(d)) for j in range(d)]
    terms.append(tuple(M for _ in range(d)))
    return TensorOperator(tuple(terms), (space.n,) * d)


def build_mass_operator(space: SplineSpace, d: int, M=None) -> TensorOperator:
    M = assemble_mass(space) if M is None else M
    return TensorOperator(((M,) * d,), (space.n,) * d)


def _cos_moments(space: SplineSpace, nq: int) -> np.ndarray:
    x, w = gauss_points(space, nq)
    first, vals = eval_basis_many(space, x, 0)
    v = np.zeros(space.n)
    cols = first[:, None] + np.arange(space.p + 1)
    np.add.at(v, cols, vals[:, 0, :] * (w * np.cos(np.pi * x))[:, None])
    return v


def assemble_rhs(space: SplineSpace, d: int, nq: int | None = None) -> np.ndarray:
    """Load vector ``<f, φ_α>`` as a rank-one tensor of univariate moments."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    v = _cos_moments(space, space.p + 2 if nq is None else nq)
    out = np.ones(1)
    for _ in range(d):
        out = np.kron(out, v)
    return d * math.pi**2 * out


def exact_solution(x: np.ndarray, d: int) -> np.ndarray:
    """``u*`` at points ``x`` of shape ``(npts, d)``."""
    x = np.atleast_2d(x)
    c = d * math.pi**2 / (d * math.pi**2 + 1.0)
    return c * np.prod(np.cos(np.pi * x), axis=1)


def exact_solution_error(u_coeffs: np.ndarray, space: SplineSpace, d: int,
                         nq: int | None = None) -> float:
    """L2 error of the spline ``u_coeffs`` against ``u*`` by tensor Gauss quadrature."""
    nq = space.p + 2 if nq is None else nq
    x, w = gauss_points(space, nq)
    B = collocation_matrix(space, x)
    uh = kron_apply((B,) * d, u_coeffs)
    c = d * math.pi**2 / (d * math.pi**2 + 1.0)
    ustar = c * np.cos(np.pi * x)
    # exact solution and weights are rank one on the tensor grid
    ustar_t = np.ones(1)
    w_t = np.ones(1)
    for _ in range(d):
        ustar_t = np.kron(ustar_t, ustar)
        w_t = np.kron(w_t, w)
    ustar_t *= 1.0 / c ** (d - 1)
    return float(np.sqrt(np.sum(w_t * (uh - ustar_t) ** 2)))


@dataclass(frozen=True, eq=False)
class ModelProblem:
    d: int
    space: SplineSpace
    A: TensorOperator
    Md: TensorOperator
    rhs: np.ndarray


def make_problem(space: SplineSpace, d: int) -> ModelProblem:
    M = assemble_mass(space)
    K = assemble_stiffness(space)
    return ModelProblem(
        d=d,
        space=space,
        A=build_operator(space, d, M, K),
        Md=build_mass_operator(space, d, M),
        rhs=assemble_rhs(space, d),
    )
