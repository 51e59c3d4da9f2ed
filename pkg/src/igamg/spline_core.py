"""Univariate maximum-smoothness spline spaces on (0, 1).

B-spline evaluation, Gauss quadrature assembly of mass and stiffness
matrices in lower band storage, and the two-scale prolongation between
dyadically refined spaces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse

__all__ = [
    "SplineSpace",
    "BandedSymMatrix",
    "make_space",
    "eval_basis",
    "eval_basis_many",
    "collocation_matrix",
    "gauss_points",
    "assemble_mass",
    "assemble_stiffness",
    "prolongation",
]


@dataclass(frozen=True)
class SplineSpace:
    """Degree-``p`` splines of maximum smoothness on ``m`` uniform spans."""

    p: int
    m: int

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def n(self) -> int:
        return self.m + self.p

    @cached_property
    def knots(self) -> np.ndarray:
        interior = np.arange(1, self.m) / self.m
        kv = np.concatenate([np.zeros(self.p + 1), interior, np.ones(self.p + 1)])
        kv.setflags(write=False)
        return kv

    def __repr__(self) -> str:
        return f"SplineSpace(p={self.p}, m={self.m})"


def make_space(p: int, m: int) -> SplineSpace:
    if int(p) != p or p < 1:
        raise ValueError(f"degree must be an integer >= 1, got {p!r}")
    if int(m) != m or m < 1:
        raise ValueError(f"number of spans must be an integer >= 1, got {m!r}")
    return SplineSpace(int(p), int(m))


@dataclass(frozen=True, eq=False)
class BandedSymMatrix:
    """Symmetric matrix in LAPACK lower band layout.

    ``ab[i, j] = A[j + i, j]`` for ``0 <= i <= bandwidth``; entries of ``ab``
    past the end of a diagonal are zero.
    """

    ab: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.ab.shape[1]

    @property
    def bandwidth(self) -> int:
        return self.ab.shape[0] - 1

    @classmethod
    def from_dense(cls, A, bandwidth: int | None = None) -> "BandedSymMatrix":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        if bandwidth is None:
            i, j = np.nonzero(A)
            bandwidth = int(np.max(np.abs(i - j))) if i.size else 0
        bandwidth = min(bandwidth, max(n - 1, 0))
        ab = np.zeros((bandwidth + 1, n))
        for k in range(bandwidth + 1):
            ab[k, : n - k] = np.diagonal(A, -k)
        return cls(ab)

    @classmethod
    def from_sparse(cls, S) -> "BandedSymMatrix":
        S = scipy.sparse.coo_matrix(S)
        n = S.shape[0]
        lower = S.row >= S.col
        rows, cols, vals = S.row[lower], S.col[lower], S.data[lower]
        bw = int(np.max(rows - cols)) if rows.size else 0
        ab = np.zeros((bw + 1, n))
        np.add.at(ab, (rows - cols, cols), vals)
        return cls(ab)

    def to_dense(self) -> np.ndarray:
        n, bw = self.dim, self.bandwidth
        A = np.zeros((n, n))
        for k in range(bw + 1):
            d = self.ab[k, : n - k]
            A[np.arange(k, n), np.arange(n - k)] = d
            if k:
                A[np.arange(n - k), np.arange(k, n)] = d
        return A

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        n, bw = self.dim, self.bandwidth
        diags, offsets = [], []
        for k in range(bw + 1):
            diags.append(self.ab[k, : n - k])
            offsets.append(-k)
            if k:
                diags.append(self.ab[k, : n - k])
                offsets.append(k)
        return scipy.sparse.diags(diags, offsets, shape=(n, n), format="csr")

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_sparse() @ x

    @property
    def cholesky_band(self) -> np.ndarray:
        """Lower Cholesky factor in the same band layout (cached)."""
        cb = self._cache.get("chol")
        if cb is None:
            cb = scipy.linalg.cholesky_banded(self.ab, lower=True)
            self._cache["chol"] = cb
        return cb

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve_banded((self.cholesky_band, True), b)

    def __mul__(self, c: float) -> "BandedSymMatrix":
        return BandedSymMatrix(c * self.ab)

    __rmul__ = __mul__


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _find_spans(space: SplineSpace, x: np.ndarray) -> np.ndarray:
    # right-continuous at interior knots, last span at x = 1
    kv = space.knots
    s = np.searchsorted(kv, x, side="right") - 1
    return np.clip(s, space.p, space.n - 1)


def _ders_basis(kv: np.ndarray, p: int, spans: np.ndarray, x: np.ndarray, nd: int) -> np.ndarray:
    """Derivatives 0..nd of the p+1 active B-splines, vectorized over points.

    Returns an array of shape ``(npts, nd + 1, p + 1)``.  Follows the
    classical triangular-table scheme (Piegl & Tiller, A2.3).
    """
    npts = x.shape[0]
    ndu = np.zeros((npts, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((npts, p + 1))
    right = np.zeros((npts, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - kv[spans + 1 - j]
        right[:, j] = kv[spans + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((npts, nd + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    top = min(nd, p)
    a = np.zeros((npts, 2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[:, 0, 0] = 1.0
        for k in range(1, top + 1):
            d = np.zeros(npts)
            rk, pk = r - k, p - k
            if r >= k:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, k] * ndu[:, r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, top + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return ders


def eval_basis_many(space: SplineSpace, x, nderiv: int = 0):
    """Evaluate all active B-splines and derivatives at many points.

    Returns ``(first, vals)`` with ``first`` the index of the first active
    function per point and ``vals[q, r, i]`` the ``r``-th derivative of
    function ``first[q] + i`` at ``x[q]``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise ValueError("evaluation points must lie in [0, 1]")
    spans = _find_spans(space, x)
    vals = _ders_basis(space.knots, space.p, spans, x, nderiv)
    return spans - space.p, vals


def eval_basis(space: SplineSpace, x: float, deriv_order: int = 0):
    """Values (or derivatives) of the active B-splines at a single point."""
    if deriv_order < 0:
        raise ValueError("deriv_order must be nonnegative")
    first, vals = eval_basis_many(space, [x], deriv_order)
    return int(first[0]), vals[0, deriv_order].copy()


def collocation_matrix(space: SplineSpace, x, deriv_order: int = 0) -> scipy.sparse.csr_matrix:
    """Sparse ``len(x) x n`` matrix of basis function (derivative) values."""
    first, vals = eval_basis_many(space, x, deriv_order)
    npts, p = len(first), space.p
    rows = np.repeat(np.arange(npts), p + 1)
    cols = (first[:, None] + np.arange(p + 1)).ravel()
    return scipy.sparse.csr_matrix(
        (vals[:, deriv_order, :].ravel(), (rows, cols)), shape=(npts, space.n)
    )


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------

def gauss_points(space: SplineSpace, nq: int):
    """Gauss-Legendre nodes and weights, ``nq`` per knot span."""
    xi, wi = np.polynomial.legendre.leggauss(nq)
    h = space.h
    left = np.arange(space.m) * h
    x = (left[:, None] + 0.5 * h * (xi + 1.0)).ravel()
    w = np.tile(0.5 * h * wi, space.m)
    return x, w


def _assemble(space: SplineSpace, deriv: int, nq: int | None = None) -> BandedSymMatrix:
    p = space.p
    nq = p + 1 if nq is None else nq
    x, w = gauss_points(space, nq)
    first, vals = eval_basis_many(space, x, deriv)
    v = vals[:, deriv, :].reshape(space.m, nq, p + 1)
    wq = w.reshape(space.m, nq)
    loc = np.einsum("eqi,eqj,eq->eij", v, v, wq)
    first_e = first.reshape(space.m, nq)[:, 0]
    ab = np.zeros((p + 1, space.n))
    ii, jj = np.tril_indices(p + 1)
    rows = (ii - jj)[None, :].repeat(space.m, 0)
    cols = first_e[:, None] + jj[None, :]
    np.add.at(ab, (rows.ravel(), cols.ravel()), loc[:, ii, jj].ravel())
    return BandedSymMatrix(ab)


def assemble_mass(space: SplineSpace, nq: int | None = None) -> BandedSymMatrix:
    """Mass matrix ``(phi_i, phi_j)``; ``p + 1`` Gauss points per span by default."""
    return _assemble(space, 0, nq)


def assemble_stiffness(space: SplineSpace, nq: int | None = None) -> BandedSymMatrix:
    """Stiffness matrix ``(phi_i', phi_j')``."""
    return _assemble(space, 1, nq)


# --------------------------------------------------------------------------
# refinement
# --------------------------------------------------------------------------

def _insert_knot(kv: np.ndarray, C: np.ndarray, p: int, t: float):
    s = int(np.searchsorted(kv, t, side="right") - 1)
    n = C.shape[0]
    Q = np.empty((n + 1, C.shape[1]))
    Q[: s - p + 1] = C[: s - p + 1]
    Q[s + 1 :] = C[s:]
    i = np.arange(s - p + 1, s + 1)
    alpha = (t - kv[i]) / (kv[i + p] - kv[i])
    Q[i] = alpha[:, None] * C[i] + (1.0 - alpha)[:, None] * C[i - 1]
    return np.insert(kv, s + 1, t), Q


def prolongation(coarse: SplineSpace, fine: SplineSpace) -> scipy.sparse.csr_matrix:
    """Embedding of ``coarse`` into ``fine`` by midpoint knot insertion.

    Column ``j`` holds the fine-space coefficients of coarse B-spline ``j``.
    """
    if coarse.p != fine.p:
        raise ValueError(f"degree mismatch: {coarse.p} vs {fine.p}")
    if fine.m != 2 * coarse.m:
        raise ValueError(f"expected dyadic refinement, got m={coarse.m} -> {fine.m}")
    kv = np.array(coarse.knots)
    C = np.eye(coarse.n)
    for j in range(coarse.m):
        kv, C = _insert_knot(kv, C, coarse.p, (j + 0.5) * coarse.h)
    C[np.abs(C) < 1e-15] = 0.0
    return scipy.sparse.csr_matrix(C)
