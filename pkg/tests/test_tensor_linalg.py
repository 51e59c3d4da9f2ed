from functools import reduce

import numpy as np
import pytest
import scipy.sparse
from hypothesis import given, strategies as st

from helpers import rel
from igamg.spline_core import BandedSymMatrix
from igamg.tensor_linalg import (
    AxisPermutation,
    BandedFactor,
    DenseFactor,
    TensorOperator,
    count_flops,
    factorize,
    kron_apply,
    kron_solve,
    mode_apply,
    permute_axes,
    tensor_op_apply,
)


def _spd(rng, n, bw=None):
    A = rng.standard_normal((n, n))
    if bw is not None:
        A = np.triu(np.tril(A, bw), -bw)
    A = A @ A.T if bw is None else A + A.T
    return A + (np.abs(A).sum(axis=1).max() + 1) * np.eye(n)


def _npkron(mats):
    return reduce(np.kron, mats)


dims_st = st.lists(st.integers(1, 5), min_size=1, max_size=3)


@given(dims_st, st.integers(0, 20), st.sampled_from(["dense", "banded", "sparse"]))
def test_kron_apply_matches_dense(dims, seed, kind):
    rng = np.random.default_rng(seed)
    mats = [_spd(rng, n, 1) for n in dims]
    if kind == "banded":
        facs = [BandedSymMatrix.from_dense(A, 1) for A in mats]
    elif kind == "sparse":
        facs = [scipy.sparse.csr_matrix(A) for A in mats]
    else:
        facs = mats
    x = rng.standard_normal(int(np.prod(dims)))
    assert rel(kron_apply(facs, x), _npkron(mats) @ x) < 1e-12


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 4), st.integers(0, 9))
def test_rectangular_factors(r1, c1, c2, seed):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((r1, c1)), rng.standard_normal((3, c2))
    x = rng.standard_normal(c1 * c2)
    assert np.allclose(kron_apply((A, B), x), np.kron(A, B) @ x)


def test_identity_factor_needs_dims():
    x = np.arange(6.0)
    A = np.array([[2.0, 0], [1, 1]])
    assert np.allclose(kron_apply((None, A), x, dims=(3, 2)), np.kron(np.eye(3), A) @ x)
    with pytest.raises(ValueError):
        kron_apply((None, A), x)


def test_mode_apply_shape_check():
    with pytest.raises(ValueError):
        mode_apply(np.eye(3), np.zeros(8), (2, 4), 1)


@given(dims_st, st.integers(0, 20))
def test_kron_solve_matches_dense(dims, seed):
    rng = np.random.default_rng(seed)
    mats = [_spd(rng, n, 2) for n in dims]
    facs = [BandedFactor(BandedSymMatrix.from_dense(A, 2)) if i % 2 == 0 else DenseFactor(A)
            for i, A in enumerate(mats)]
    b = rng.standard_normal(int(np.prod(dims)))
    assert rel(kron_solve(facs, b), np.linalg.solve(_npkron(mats), b)) < 1e-10


def test_factorize_dispatch():
    A = BandedSymMatrix.from_dense(_spd(np.random.default_rng(0), 6, 1), 1)
    assert isinstance(factorize(A), BandedFactor)
    assert isinstance(factorize(A, dense_cutoff=10), DenseFactor)
    assert isinstance(factorize(np.eye(3)), DenseFactor)
    with pytest.raises(np.linalg.LinAlgError):
        DenseFactor(-np.eye(2))


@given(dims_st, st.integers(1, 3), st.integers(0, 9))
def test_tensor_operator(dims, nterms, seed):
    rng = np.random.default_rng(seed)
    terms = [tuple(_spd(rng, n) for n in dims) for _ in range(nterms)]
    op = TensorOperator(tuple(terms))
    ref = sum(_npkron(t) for t in terms)
    x = rng.standard_normal(op.size)
    assert rel(tensor_op_apply(op, x), ref @ x) < 1e-12
    assert rel(op @ x, ref @ x) < 1e-12
    assert np.allclose(op.to_dense(), ref)
    assert np.allclose(op.to_sparse().toarray(), ref)


def test_tensor_operator_validation():
    with pytest.raises(ValueError):
        TensorOperator(())
    with pytest.raises(ValueError):
        TensorOperator(((np.eye(2), np.eye(3)), (np.eye(2),)))
    with pytest.raises(ValueError):
        TensorOperator(((np.ones((2, 3)),),))
    with pytest.raises(ValueError):
        tensor_op_apply(TensorOperator(((np.eye(2),),)), np.zeros(3))


@given(st.permutations([0, 1, 2]), st.lists(st.integers(1, 4), min_size=3, max_size=3))
def test_permutation_roundtrip(perm, dims):
    P = AxisPermutation(tuple(perm))
    x = np.arange(np.prod(dims), dtype=float)
    y = permute_axes(x, dims, P)
    assert np.array_equal(y, x.reshape(dims).transpose(perm).ravel())
    assert np.array_equal(permute_axes(y, P.permute_dims(dims), P.inverse()), x)


def test_permutation_invalid():
    with pytest.raises(ValueError):
        AxisPermutation((0, 0))


def test_flop_counter_is_scoped():
    A = BandedSymMatrix.from_dense(_spd(np.random.default_rng(1), 10, 2), 2)
    x = np.ones(100)
    with count_flops() as c:
        kron_apply((A, A), x)
    assert c.counts["band_matvec"] == 2 * 2 * (2 * 2 + 1) * 100
    kron_apply((A, A), x)
    assert c.total == 2 * 2 * 5 * 100
