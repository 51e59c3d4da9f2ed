import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import oracle_spline
from igamg.checks import inverse_inequality_constant
from igamg.spline_core import assemble_mass, assemble_stiffness, make_space
from igamg.splitting import (
    SplittingError,
    _side_basis,
    boundary_derivative_matrix,
    compute_splitting,
    subspace_gram,
)


def _split(p, m):
    s = make_space(p, m)
    M, K = assemble_mass(s), assemble_stiffness(s)
    b = compute_splitting(s, M)
    return s, M, K, b


@st.composite
def fitting(draw, max_p=9):
    p = draw(st.integers(1, max_p))
    m = draw(st.integers(p + 1, p + 20))
    return p, m


@given(fitting())
def test_shapes_and_orthonormal_frame(pm):
    s, M, K, b = _split(*pm)
    k = s.p // 2
    assert b.k == k and b.n0 == s.n - 2 * k and b.n1 == 2 * k
    Q = np.hstack([b.P0.toarray(), b.P_perp.toarray()])
    assert np.allclose(Q.T @ Q, np.eye(s.n), atol=1e-12)


@given(fitting())
def test_s1_is_mass_inverse_of_perp(pm):
    s, M, K, b = _split(*pm)
    if b.k:
        R = M.to_dense() @ (b.P1 * b.P1_scale) - b.P_perp.toarray()
        assert np.abs(R).max() < 1e-8
        assert np.allclose(np.linalg.norm(b.P1, axis=0), 1.0)


@given(fitting(14))
def test_l2_orthogonality(pm):
    s, M, K, b = _split(*pm)
    if not b.k:
        return
    Md = M.to_dense()
    assert np.linalg.norm(b.P0.T @ Md @ b.P1, 2) <= 1e-12 * np.linalg.norm(Md, 2)


@given(fitting(9), st.integers(0, 5))
def test_s0_odd_derivatives_vanish(pm, seed):
    # scipy evaluates the derivatives independently of our basis code
    s, M, K, b = _split(*pm)
    u = b.P0 @ np.random.default_rng(seed).standard_normal(b.n0)
    spl = oracle_spline(s, u)
    scale = np.abs(u).max()
    for i in range(1, b.k + 1):
        r = 2 * i - 1
        der = spl.derivative(r)
        for x in (0.0, 1.0 - 1e-14):
            assert abs(s.h**r * der(x)) <= 1e-9 * scale


def test_p1_trivial():
    s, M, K, b = _split(1, 4)
    assert b.k == 0 and b.n1 == 0
    assert np.array_equal(b.P0.toarray(), np.eye(s.n))


@pytest.mark.parametrize("side", ["left", "right"])
def test_boundary_matrix_rank(side):
    s = make_space(6, 16)
    D = boundary_derivative_matrix(s, side)
    assert D.shape == (6, 6)
    assert np.all(D[3:] == 0)
    assert np.linalg.matrix_rank(D / np.linalg.norm(D, axis=1, keepdims=True).clip(1e-300)) == 3


def test_boundary_matrix_guards():
    with pytest.raises(ValueError):
        boundary_derivative_matrix(make_space(4, 4), "left")
    with pytest.raises(ValueError):
        boundary_derivative_matrix(make_space(2, 4), "top")


def test_side_basis_rank_mismatch():
    D = np.zeros((4, 4))
    D[0, 0] = 1.0
    D[1, 0] = 2.0  # rank 1, two rows expected
    with pytest.raises(SplittingError):
        _side_basis(D, 2)


def test_sign_convention_reproducible():
    a = _split(5, 16)[3]
    b = _split(5, 16)[3]
    assert np.array_equal(a.P0.toarray(), b.P0.toarray())
    assert np.array_equal(a.P1, b.P1)
    V = np.hstack([a.V0_left, a.V0_right])
    idx = np.argmax(np.abs(V), axis=0)
    assert np.all(V[idx, np.arange(V.shape[1])] > 0)


@given(fitting(8))
def test_grams(pm):
    s, M, K, b = _split(*pm)
    g = subspace_gram(b, M, K)
    assert g.M0.bandwidth <= 2 * s.p and g.K0.bandwidth <= 2 * s.p
    P0 = b.P0.toarray()
    assert np.allclose(g.M0.to_dense(), P0.T @ M.to_dense() @ P0, atol=1e-14)
    assert np.allclose(g.M1, g.M1.T) and np.allclose(g.K1, g.K1.T)
    if b.k:
        assert np.linalg.eigvalsh(g.M1).min() > 0


@given(fitting(8), st.integers(0, 5))
def test_mass_splits_without_cross_terms(pm, seed):
    s, M, K, b = _split(*pm)
    g = subspace_gram(b, M, K)
    rng = np.random.default_rng(seed)
    e, f = rng.standard_normal(b.n0), rng.standard_normal(b.n1)
    v = b.P0 @ e + b.P1 @ f
    lhs = v @ M.matvec(v)
    rhs = e @ g.M0.matvec(e) + f @ g.M1 @ f
    assert lhs == pytest.approx(rhs, rel=1e-10)


@pytest.mark.parametrize("p", [1, 2, 5, 9, 14])
def test_inverse_inequality(p):
    for m in (2 ** int(np.ceil(np.log2(p + 1))), 128):
        assert inverse_inequality_constant(p, m) <= 12 + 1e-6


def test_inverse_inequality_sharp_for_p1():
    assert inverse_inequality_constant(1, 64) == pytest.approx(12, rel=1e-3)
