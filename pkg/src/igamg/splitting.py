"""The L2-orthogonal splitting S = S0 ⊕ S1 of a univariate spline space.

S0 holds the splines whose odd derivatives of order < p vanish at both
endpoints; S1 is its L2-orthogonal complement.  Both are represented by
coefficient matrices with respect to the B-spline basis:

* ``P0`` (n x (n - 2k)): block diagonal, boundary blocks from the kernel of
  the scaled boundary-derivative matrix, identity on the interior B-splines;
* ``P_perp`` (n x 2k): the complementary singular vectors, so that
  ``[P0 | P_perp]`` is orthogonal;
* ``P1``: a basis of S1, the columns of ``M^{-1} P_perp`` scaled to unit
  length (``M^{-1} P_perp = P1 diag(P1_scale)``).  Those columns grow
  like the inverse of the smallest boundary eigenvalue of ``M``, so
  unscaled they would put a ``eps ||M^{-1}||`` floor on every product
  with ``M``.

``k = floor(p / 2)`` throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse

from .spline_core import BandedSymMatrix, SplineSpace, eval_basis

__all__ = [
    "SplittingBasis",
    "SplittingError",
    "boundary_derivative_matrix",
    "compute_splitting",
    "subspace_gram",
    "SubspaceGrams",
    "RANK_TOL",
]

RANK_TOL = 1e-8


class SplittingError(RuntimeError):
    """The numerical rank of a boundary-derivative matrix is not ``floor(p/2)``."""


@dataclass(frozen=True, eq=False)
class SplittingBasis:
    space: SplineSpace
    k: int
    P0: scipy.sparse.csr_matrix
    P_perp: scipy.sparse.csr_matrix
    P1: np.ndarray
    P1_scale: np.ndarray
    # boundary blocks, kept for structured application of P0
    V0_left: np.ndarray
    V0_right: np.ndarray
    singular_values: tuple

    @cached_property
    def P0T(self) -> scipy.sparse.csr_matrix:
        return self.P0.T.tocsr()

    @property
    def n0(self) -> int:
        return self.P0.shape[1]

    @property
    def n1(self) -> int:
        return self.P1.shape[1]


def _check_fits(space: SplineSpace) -> None:
    if space.p + 1 > space.m:
        raise ValueError(
            f"splitting needs p + 1 <= m (got p={space.p}, m={space.m})"
        )


def boundary_derivative_matrix(space: SplineSpace, side: str) -> np.ndarray:
    """Scaled odd derivatives of the p boundary B-splines, padded to p x p.

    Row ``i - 1`` (``i = 1..k``) holds ``h^(2i-1) * phi_j^(2i-1)`` at the
    endpoint; the remaining ``p - k`` rows are zero.  On the right side the
    last p B-splines are evaluated at ``x = 1``.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    _check_fits(space)
    p, h = space.p, space.h
    k = p // 2
    D = np.zeros((p, p))
    x = 0.0 if side == "left" else 1.0
    for i in range(1, k + 1):
        order = 2 * i - 1
        first, vals = eval_basis(space, x, order)
        # the p+1 active functions at an endpoint; the innermost one is an
        # interior B-spline and has vanishing derivatives there
        if side == "left":
            assert first == 0
            row = vals[:p]
        else:
            assert first == space.n - p - 1
            row = vals[1:]
        D[i - 1] = h**order * row
    return D


def _side_basis(D: np.ndarray, k: int):
    p = D.shape[0]
    if k == 0:
        return np.eye(p), np.zeros((p, 0)), np.zeros(p)
    # rows of D differ in scale by orders of magnitude for large p; the
    # kernel (and the row space) is unchanged by normalizing the rows
    scale = np.linalg.norm(D, axis=1)
    Dn = D.copy()
    nz = scale > 0
    Dn[nz] /= scale[nz, None]
    _, s, Vt = np.linalg.svd(Dn)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s[0] > 0 else 0
    if rank != k:
        raise SplittingError(f"boundary derivative matrix has rank {rank}, expected {k}")
    V = Vt.T.copy()
    # make each singular vector's largest entry positive
    idx = np.argmax(np.abs(V), axis=0)
    V *= np.sign(V[idx, np.arange(p)])
    return V[:, k:], V[:, :k], s


def compute_splitting(space: SplineSpace, M: BandedSymMatrix) -> SplittingBasis:
    _check_fits(space)
    p, n = space.p, space.n
    k = p // 2
    VL0, VLp, sL = _side_basis(boundary_derivative_matrix(space, "left"), k)
    VR0, VRp, sR = _side_basis(boundary_derivative_matrix(space, "right"), k)

    n0 = n - 2 * k
    P0 = np.zeros((n, n0))
    P0[:p, : p - k] = VL0
    P0[p : n - p, p - k : n0 - (p - k)] = np.eye(n - 2 * p)
    P0[n - p :, n0 - (p - k) :] = VR0

    Pp = np.zeros((n, 2 * k))
    Pp[:p, :k] = VLp
    Pp[n - p :, k:] = VRp

    if k:
        P1 = M.solve(Pp)
        scale = np.linalg.norm(P1, axis=0)
        P1 /= scale
    else:
        P1, scale = np.zeros((n, 0)), np.zeros(0)
    return SplittingBasis(
        space=space,
        k=k,
        P0=scipy.sparse.csr_matrix(P0),
        P_perp=scipy.sparse.csr_matrix(Pp),
        P1=np.ascontiguousarray(P1),
        P1_scale=scale,
        V0_left=VL0,
        V0_right=VR0,
        singular_values=(tuple(sL), tuple(sR)),
    )


@dataclass(frozen=True, eq=False)
class SubspaceGrams:
    M0: BandedSymMatrix
    K0: BandedSymMatrix
    M1: np.ndarray
    K1: np.ndarray


def subspace_gram(basis: SplittingBasis, M: BandedSymMatrix, K: BandedSymMatrix) -> SubspaceGrams:
    """Mass and stiffness matrices restricted to S0 and S1."""
    P0 = basis.P0
    Ms, Ks = M.to_sparse(), K.to_sparse()
    M0 = BandedSymMatrix.from_sparse((P0.T @ Ms @ P0).tocoo())
    K0 = BandedSymMatrix.from_sparse((P0.T @ Ks @ P0).tocoo())
    P1 = basis.P1
    M1 = P1.T @ (Ms @ P1)
    K1 = P1.T @ (Ks @ P1)
    # exact symmetry for the dense Cholesky factors built from these
    M1 = 0.5 * (M1 + M1.T)
    K1 = 0.5 * (K1 + K1.T)
    return SubspaceGrams(M0=M0, K0=K0, M1=M1, K1=K1)
