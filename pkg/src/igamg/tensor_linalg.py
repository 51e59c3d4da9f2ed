"""Kronecker-structured linear algebra.

Coefficient vectors of tensor-product spaces are stored lexicographically
with the last axis varying fastest, i.e. ``x.reshape(dims)`` in C order.
All operators act by mode products (one axis at a time); Kronecker products
are never formed.

Factors accepted by :func:`kron_apply` are dense ``ndarray``,
:class:`BandedSymMatrix`, any ``scipy.sparse`` matrix, or ``None`` for the
identity.  :func:`kron_solve` takes :class:`KroneckerFactor` objects built by
:func:`factorize`.
"""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from . import kernels
from .spline_core import BandedSymMatrix

__all__ = [
    "FlopCounter",
    "count_flops",
    "KroneckerFactor",
    "BandedFactor",
    "DenseFactor",
    "factorize",
    "mode_apply",
    "mode_solve",
    "kron_apply",
    "kron_solve",
    "TensorOperator",
    "tensor_op_apply",
    "AxisPermutation",
    "permute_axes",
    "kron_dense",
]


# --------------------------------------------------------------------------
# flop instrumentation
# --------------------------------------------------------------------------

class FlopCounter:
    """Accumulates analytic operation counts by category."""

    def __init__(self):
        self.counts: dict[str, int] = {}

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def add(self, kind: str, n: int) -> None:
        self.counts[kind] = self.counts.get(kind, 0) + int(n)


_active_counters: list[FlopCounter] = []


def _flops(kind: str, n: int) -> None:
    for c in _active_counters:
        c.add(kind, n)


@contextlib.contextmanager
def count_flops(counter: FlopCounter | None = None):
    """Count operations issued by this module inside the ``with`` block."""
    counter = FlopCounter() if counter is None else counter
    _active_counters.append(counter)
    try:
        yield counter
    finally:
        _active_counters.remove(counter)


# --------------------------------------------------------------------------
# factors
# --------------------------------------------------------------------------

class KroneckerFactor:
    """A factorized SPD matrix acting along one tensor axis."""

    dim: int

    def solve_axis(self, x3: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        raise NotImplementedError


class BandedFactor(KroneckerFactor):
    def __init__(self, A: BandedSymMatrix, scale: float = 1.0):
        self.A = A if scale == 1.0 else A * scale
        n, bw = self.A.dim, self.A.bandwidth
        try:
            self.cb = np.ascontiguousarray(self.A.cholesky_band)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"banded Cholesky failed: {exc}") from exc
        self.dim = n
        _flops("factor", n * (bw + 1) ** 2)

    def solve_axis(self, x3):
        pre, n, post = x3.shape
        _flops("band_solve", 4 * (self.A.bandwidth + 1) * n * pre * post)
        return kernels.band_cho_solve(self.cb, x3)

    def to_dense(self):
        return self.A.to_dense()


class DenseFactor(KroneckerFactor):
    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        self.A = A
        self.dim = A.shape[0]
        try:
            self.L = scipy.linalg.cholesky(A, lower=True)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"dense Cholesky failed: {exc}") from exc
        _flops("factor", self.dim**3 // 3 + 1)

    def solve_axis(self, x3):
        pre, n, post = x3.shape
        _flops("dense_solve", 2 * n * n * pre * post)
        if pre * post == 0 or n == 0:
            return x3.copy()
        b = x3.transpose(1, 0, 2).reshape(n, pre * post)
        y = scipy.linalg.cho_solve((self.L, True), b, check_finite=False)
        return np.ascontiguousarray(y.reshape(n, pre, post).transpose(1, 0, 2))

    def to_dense(self):
        return self.A


def factorize(A, dense_cutoff: int = 0) -> KroneckerFactor:
    """Cholesky-factorize an SPD factor.

    Banded matrices of dimension ``<= dense_cutoff`` are factorized densely.
    """
    if isinstance(A, KroneckerFactor):
        return A
    if isinstance(A, BandedSymMatrix):
        if A.dim <= dense_cutoff:
            return DenseFactor(A.to_dense())
        return BandedFactor(A)
    if scipy.sparse.issparse(A):
        return DenseFactor(A.toarray())
    return DenseFactor(np.asarray(A))


# --------------------------------------------------------------------------
# mode products
# --------------------------------------------------------------------------

def _shape(A) -> tuple[int, int]:
    if isinstance(A, BandedSymMatrix):
        return (A.dim, A.dim)
    return A.shape


def _as3(x: np.ndarray, dims: Sequence[int], axis: int) -> np.ndarray:
    pre = math.prod(dims[:axis])
    post = math.prod(dims[axis + 1 :])
    return np.ascontiguousarray(x).reshape(pre, dims[axis], post)


def _apply3(A, x3: np.ndarray) -> np.ndarray:
    pre, n, post = x3.shape
    cols = pre * post
    if isinstance(A, BandedSymMatrix):
        _flops("band_matvec", 2 * (2 * A.bandwidth + 1) * n * cols)
        return kernels.band_matvec(np.ascontiguousarray(A.ab), x3)
    if scipy.sparse.issparse(A):
        A = A.tocsr()
        _flops("sparse_matvec", 2 * A.nnz * cols)
        return kernels.csr_matvec(
            A.indptr.astype(np.intc), A.indices.astype(np.intc),
            np.ascontiguousarray(A.data, dtype=float), A.shape[0], x3,
        )
    A = np.asarray(A)
    _flops("dense_matvec", 2 * A.shape[0] * A.shape[1] * cols)
    if cols == 0 or A.size == 0:
        return np.zeros((pre, A.shape[0], post))
    return np.matmul(A, x3)


def mode_apply(A, x: np.ndarray, dims: Sequence[int], axis: int):
    """Apply ``A`` along ``axis``; returns ``(y, new_dims)`` with ``y`` flat."""
    dims = tuple(dims)
    if A is None:
        return np.asarray(x), dims
    r, c = _shape(A)
    if c != dims[axis]:
        raise ValueError(f"factor with {c} columns applied to axis of size {dims[axis]}")
    y = _apply3(A, _as3(x, dims, axis))
    new_dims = dims[:axis] + (r,) + dims[axis + 1 :]
    return y.reshape(-1), new_dims


def mode_solve(F: KroneckerFactor | None, x: np.ndarray, dims: Sequence[int], axis: int):
    dims = tuple(dims)
    if F is None:
        return np.asarray(x)
    if F.dim != dims[axis]:
        raise ValueError(f"factor of size {F.dim} applied to axis of size {dims[axis]}")
    return F.solve_axis(_as3(x, dims, axis)).reshape(-1)


def _infer_dims(factors, dims):
    if dims is not None:
        dims = tuple(int(n) for n in dims)
        if len(dims) != len(factors):
            raise ValueError("dims and factors differ in length")
        return dims
    out = []
    for A in factors:
        if A is None:
            raise ValueError("identity factors need explicit dims")
        out.append(_shape(A)[1])
    return tuple(out)


def kron_apply(factors: Sequence, x: np.ndarray, dims: Sequence[int] | None = None) -> np.ndarray:
    """``(A_1 ⊗ ... ⊗ A_d) x`` by successive mode products."""
    dims = _infer_dims(factors, dims)
    x = np.asarray(x, dtype=float)
    if x.size != math.prod(dims):
        raise ValueError(f"vector of length {x.size} does not match dims {dims}")
    for axis, A in enumerate(factors):
        x, dims = mode_apply(A, x, dims, axis)
    return x


def kron_solve(factors: Sequence[KroneckerFactor | None], b: np.ndarray,
               dims: Sequence[int] | None = None) -> np.ndarray:
    """``(A_1 ⊗ ... ⊗ A_d)^{-1} b`` using per-axis Cholesky solves."""
    if dims is None:
        dims = tuple(F.dim for F in factors)
    dims = tuple(dims)
    b = np.asarray(b, dtype=float)
    if b.size != math.prod(dims):
        raise ValueError(f"vector of length {b.size} does not match dims {dims}")
    x = b
    for axis, F in enumerate(factors):
        x = mode_solve(F, x, dims, axis)
    return x


# --------------------------------------------------------------------------
# sums of Kronecker products
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorOperator:
    """``sum_t A_{t,1} ⊗ ... ⊗ A_{t,d}`` acting on vectors of length ``prod(dims)``."""

    terms: tuple
    dims: tuple = field(default=None)

    def __post_init__(self):
        terms = tuple(tuple(t) for t in self.terms)
        if not terms:
            raise ValueError("operator needs at least one term")
        d = len(terms[0])
        dims = self.dims
        for t in terms:
            if len(t) != d:
                raise ValueError("all terms must have the same number of factors")
            td = tuple(_shape(A)[1] for A in t if A is not None)
            rd = tuple(_shape(A)[0] for A in t if A is not None)
            if td != rd:
                raise ValueError("tensor operator factors must be square")
        if dims is None:
            dims = _infer_dims(terms[0], None)
        for t in terms:
            for A, n in zip(t, dims):
                if A is not None and _shape(A)[1] != n:
                    raise ValueError("terms have inconsistent per-axis dimensions")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "dims", tuple(dims))

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return math.prod(self.dims)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return tensor_op_apply(self, x)

    __matmul__ = apply

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.size, self.size))
        for t in self.terms:
            A += kron_dense(t, self.dims)
        return A

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        out = None
        for t in self.terms:
            K = None
            for A, n in zip(t, self.dims):
                if A is None:
                    S = scipy.sparse.identity(n, format="csr")
                elif isinstance(A, BandedSymMatrix):
                    S = A.to_sparse()
                else:
                    S = scipy.sparse.csr_matrix(A)
                K = S if K is None else scipy.sparse.kron(K, S, format="csr")
            out = K if out is None else out + K
        return out.tocsr()


def tensor_op_apply(op: TensorOperator, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size != op.size:
        raise ValueError(f"vector of length {x.size} does not match dims {op.dims}")
    y = np.zeros(op.size)
    for t in op.terms:
        y += kron_apply(t, x, op.dims)
    _flops("axpy", op.size * len(op.terms))
    return y


def kron_dense(factors: Sequence, dims: Sequence[int] | None = None) -> np.ndarray:
    """Explicit Kronecker product (test oracle and small coarse problems)."""
    dims = _infer_dims(factors, dims)
    out = np.ones((1, 1))
    for A, n in zip(factors, dims):
        if A is None:
            D = np.eye(n)
        elif isinstance(A, BandedSymMatrix):
            D = A.to_dense()
        elif isinstance(A, KroneckerFactor):
            D = A.to_dense()
        elif scipy.sparse.issparse(A):
            D = A.toarray()
        else:
            D = np.asarray(A, dtype=float)
        out = np.kron(out, D)
    return out


# --------------------------------------------------------------------------
# axis permutations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AxisPermutation:
    """New axis ``i`` is old axis ``perm[i]`` (``numpy.transpose`` convention)."""

    perm: tuple

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"invalid permutation {self.perm!r}")
        object.__setattr__(self, "perm", perm)

    def inverse(self) -> "AxisPermutation":
        return AxisPermutation(tuple(np.argsort(self.perm)))

    def permute_dims(self, dims: Sequence[int]) -> tuple:
        return tuple(dims[i] for i in self.perm)

    @property
    def is_identity(self) -> bool:
        return self.perm == tuple(range(len(self.perm)))


def permute_axes(x: np.ndarray, dims: Sequence[int], perm: AxisPermutation) -> np.ndarray:
    """Reorder the axes of the coefficient tensor ``x.reshape(dims)``."""
    dims = tuple(dims)
    if len(perm.perm) != len(dims):
        raise ValueError("permutation length does not match tensor order")
    x = np.asarray(x)
    if x.size != math.prod(dims):
        raise ValueError(f"vector of length {x.size} does not match dims {dims}")
    if perm.is_identity:
        return x
    return np.ascontiguousarray(x.reshape(dims).transpose(perm.perm)).reshape(-1)
