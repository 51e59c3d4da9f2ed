import numpy as np
import pytest
import scipy.sparse
from hypothesis import given, strategies as st

from helpers import oracle_gram, oracle_spline, rel
from igamg.spline_core import (
    BandedSymMatrix,
    assemble_mass,
    assemble_stiffness,
    collocation_matrix,
    eval_basis,
    eval_basis_many,
    make_space,
    prolongation,
)

spaces = st.builds(make_space, st.integers(1, 8), st.integers(1, 24))


def test_space_layout():
    s = make_space(3, 4)
    assert s.n == 7 and s.h == 0.25
    assert np.array_equal(s.knots, [0, 0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1, 1])


@pytest.mark.parametrize("p,m", [(0, 4), (2, 0), (1.5, 4)])
def test_make_space_rejects(p, m):
    with pytest.raises(ValueError):
        make_space(p, m)


@given(spaces, st.floats(0, 1))
def test_partition_of_unity(space, x):
    _, vals = eval_basis(space, x)
    assert vals.sum() == pytest.approx(1.0, abs=1e-13)
    assert np.all(vals >= -1e-15)


@given(spaces, st.lists(st.floats(0, 1), min_size=1, max_size=20), st.integers(0, 3))
def test_eval_matches_scipy(space, xs, r):
    r = min(r, space.p)
    x = np.array(xs)
    B = collocation_matrix(space, x, r).toarray()
    c = np.random.default_rng(0).standard_normal(space.n)
    s = oracle_spline(space, c)
    ref = s.derivative(r)(x) if r else s(x)
    assert np.allclose(B @ c, ref, atol=1e-9 * max(1, np.abs(ref).max()))


def test_p2_boundary_derivative():
    first, d1 = eval_basis(make_space(2, 2), 0.0, 1)
    assert first == 0
    assert np.allclose(d1, [-4, 4, 0])


def test_eval_rejects_outside():
    with pytest.raises(ValueError):
        eval_basis_many(make_space(2, 4), [1.5])


@pytest.mark.parametrize("p,m", [(1, 3), (2, 4), (3, 5), (5, 8)])
def test_mass_stiffness_vs_oracle(p, m):
    s = make_space(p, m)
    assert rel(assemble_mass(s).to_dense(), oracle_gram(s, 0)) < 1e-13
    assert rel(assemble_stiffness(s).to_dense(), oracle_gram(s, 1)) < 1e-12


def test_p1_matrices():
    s = make_space(1, 2)
    h = 0.5
    assert np.allclose(assemble_mass(s).to_dense(), h / 6 * np.array([[2, 1, 0], [1, 4, 1], [0, 1, 2]]))
    assert np.allclose(assemble_stiffness(s).to_dense(), 1 / h * np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]]))


@given(spaces)
def test_mass_sums_and_stiffness_kernel(space):
    M = assemble_mass(space).to_dense()
    K = assemble_stiffness(space).to_dense()
    assert M.sum() == pytest.approx(1.0, rel=1e-12)
    assert np.abs(K.sum(axis=1)).max() < 1e-9 * np.abs(K).max()


@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 4))
def test_prolongation_reproduces_spline(p, lc, seed):
    coarse, fine = make_space(p, 2**lc), make_space(p, 2 ** (lc + 1))
    P = prolongation(coarse, fine)
    c = np.random.default_rng(seed).standard_normal(coarse.n)
    x = np.linspace(0, 1, 37)[:-1]
    assert np.allclose(oracle_spline(fine, P @ c)(x), oracle_spline(coarse, c)(x), atol=1e-12)


def test_prolongation_p1():
    P = prolongation(make_space(1, 1), make_space(1, 2)).toarray()
    assert np.allclose(P, [[1, 0], [0.5, 0.5], [0, 1]])


@pytest.mark.parametrize("p", [1, 2, 3, 6])
def test_galerkin_identity(p):
    c, f = make_space(p, 8), make_space(p, 16)
    P = prolongation(c, f)
    for asm in (assemble_mass, assemble_stiffness):
        G = P.T @ asm(f).to_sparse() @ P
        assert rel(G.toarray(), asm(c).to_dense()) < 1e-12


def test_prolongation_rejects():
    with pytest.raises(ValueError):
        prolongation(make_space(2, 4), make_space(3, 8))
    with pytest.raises(ValueError):
        prolongation(make_space(2, 4), make_space(2, 12))


@given(st.integers(1, 30), st.integers(0, 5), st.integers(0, 9))
def test_banded_roundtrip_and_solve(n, bw, seed):
    rng = np.random.default_rng(seed)
    bw = min(bw, n - 1)
    A = rng.standard_normal((n, n))
    A = np.triu(np.tril(A + A.T, bw), -bw)
    A += (np.abs(A).sum(axis=1).max() + 1) * np.eye(n)
    B = BandedSymMatrix.from_dense(A, bw)
    assert np.allclose(B.to_dense(), A)
    assert np.allclose(BandedSymMatrix.from_sparse(scipy.sparse.coo_matrix(A)).to_dense(), A)
    x = rng.standard_normal(n)
    assert np.allclose(B.matvec(x), A @ x)
    assert np.allclose(B.solve(x), np.linalg.solve(A, x))
    assert np.allclose((2.0 * B).to_dense(), 2 * A)
