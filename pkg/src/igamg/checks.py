"""Invariant suites run by ``igamg check``.

Each suite yields :class:`CheckResult` records holding the measured value,
the bound it is compared against and the parameters of the case.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .multigrid import build_hierarchy, coarse_approx_check
from .smoother import build_smoother, estimate_smoother_spectrum, sigma_preset, sigma_theory
from .spline_core import assemble_mass, assemble_stiffness, make_space
from .splitting import boundary_derivative_matrix, compute_splitting, subspace_gram
from .model_problem import build_operator
from .tensor_linalg import factorize, kron_apply, kron_dense, kron_solve, tensor_op_apply

__all__ = [
    "CheckResult",
    "SUITES",
    "run_suite",
    "inverse_inequality_constant",
    "orthogonality_defects",
    "dense_smoother_oracle",
    "splitting_levels",
]

INVERSE_BOUND = 12.0 + 1e-6
ORTHO_M_TOL = 1e-12
ORTHO_PERP_TOL = 1e-12
ORACLE_TOL = 1e-10


@dataclass
class CheckResult:
    suite: str
    name: str
    value: float
    bound: float
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.bound)

    def line(self) -> str:
        ps = " ".join(f"{k}={v}" for k, v in self.params.items())
        tag = "ok  " if self.passed else "FAIL"
        return f"{tag} {self.suite}/{self.name} [{ps}] {self.value:.3e} <= {self.bound:.3e}"


def splitting_levels(p: int, max_m: int = 256) -> list[int]:
    """Powers of two ``m`` with ``p + 1 <= m <= max_m``."""
    m = 1 << max(0, math.ceil(math.log2(p + 1)))
    out = []
    while m <= max_m:
        out.append(m)
        m *= 2
    return out


def inverse_inequality_constant(p: int, m: int) -> float:
    """``lambda_max(M0^{-1} K0) h^2``."""
    space = make_space(p, m)
    M = assemble_mass(space)
    basis = compute_splitting(space, M)
    g = subspace_gram(basis, M, assemble_stiffness(space))
    lam = scipy.linalg.eigh(g.K0.to_dense(), g.M0.to_dense(), eigvals_only=True)[-1]
    return float(lam * space.h**2)


def orthogonality_defects(p: int, m: int) -> tuple[float, float, float]:
    """``(||P0^T M P1|| / ||M||, ||P0^T P_perp||, kernel residual)`` in the 2-norm.

    The kernel residual is ``||D_n P0_boundary||`` with the rows of the
    boundary-derivative matrix normalized to unit length.
    """
    space = make_space(p, m)
    M = assemble_mass(space)
    basis = compute_splitting(space, M)
    Md = M.to_dense()
    P0 = basis.P0.toarray()
    om = np.linalg.norm(P0.T @ Md @ basis.P1, 2) / np.linalg.norm(Md, 2) if basis.k else 0.0
    op = np.linalg.norm(P0.T @ basis.P_perp.toarray(), 2) if basis.k else 0.0
    ker = 0.0
    for side, V0 in (("left", basis.V0_left), ("right", basis.V0_right)):
        D = boundary_derivative_matrix(space, side)[: basis.k]
        if D.size:
            D = D / np.linalg.norm(D, axis=1, keepdims=True)
            ker = max(ker, float(np.abs(D @ V0).max()))
    return float(om), float(op), ker


def dense_smoother_oracle(p: int, m: int, d: int, sigma: float) -> np.ndarray:
    """``Σ_alpha P_alpha L_alpha^{-1} P_alpha^T`` built densely from M and K.

    Independent of the factorized implementation: every ``L_alpha`` is the
    restriction of ``A`` to ``S_alpha`` with ``K0`` replaced by ``sigma M0``.
    """
    space = make_space(p, m)
    Mb = assemble_mass(space)
    M, K = Mb.to_dense(), assemble_stiffness(space).to_dense()
    basis = compute_splitting(space, Mb)
    P = {0: basis.P0.toarray(), 1: basis.P1}
    Mi = {a: P[a].T @ M @ P[a] for a in (0, 1)}
    Ki = {0: sigma * Mi[0], 1: P[1].T @ K @ P[1]}
    out = np.zeros((space.n**d,) * 2)
    for alpha in itertools.product((0, 1), repeat=d):
        if P[1].shape[1] == 0 and any(alpha):
            continue
        L = kron_dense(tuple(Mi[a] for a in alpha))
        for j in range(d):
            L = L + kron_dense(tuple(Ki[a] if i == j else Mi[a] for i, a in enumerate(alpha)))
        Pa = kron_dense(tuple(P[a] for a in alpha))
        out += Pa @ np.linalg.solve(L, Pa.T)
    return out


def _rel(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / (nb if nb > 0 else 1.0))


def _oracle_cases(max_p: int):
    for d, m in ((1, 8), (2, 8), (3, 4)):
        for p in range(1, min(3, max_p) + 1):
            if p + 1 <= m:
                yield d, p, m


def suite_splitting(max_p: int, max_level: int):
    max_m = min(256, 2**max_level)
    for p in range(1, max_p + 1):
        for m in splitting_levels(p, max_m):
            par = {"p": p, "m": m}
            yield CheckResult("splitting", "inverse_inequality", inverse_inequality_constant(p, m),
                              INVERSE_BOUND, par)
            om, op, ker = orthogonality_defects(p, m)
            yield CheckResult("splitting", "P0t_M_P1", om, ORTHO_M_TOL, par)
            yield CheckResult("splitting", "P0t_Pperp", op, ORTHO_PERP_TOL, par)
            yield CheckResult("splitting", "kernel_residual", ker, ORTHO_PERP_TOL * 100, par)


def suite_smoother(max_p: int, max_level: int):
    rng = np.random.default_rng(0)
    for d, p, m in _oracle_cases(max_p):
        space = make_space(p, m)
        sigma = sigma_preset(space.h, d, p)
        M, K = assemble_mass(space), assemble_stiffness(space)
        basis = compute_splitting(space, M)
        sm = build_smoother(basis, subspace_gram(basis, M, K), d, sigma)
        r = rng.standard_normal(space.n**d)
        ref = dense_smoother_oracle(p, m, d, sigma) @ r
        yield CheckResult("smoother", "oracle", _rel(sm.apply(r), ref), ORACLE_TOL,
                          {"d": d, "p": p, "m": m})
    # theory sigma: L_alpha >= A_alpha, so lambda_max stays near 1; the
    # presets only keep it below 2, which is what tau = 1 needs
    for d in (1, 2, 3):
        m = 2 ** max(2, min(max_level, 6 if d < 3 else 4))
        for p in sorted({1, min(max_p, 3)}):
            if p + 1 > m:
                continue
            space = make_space(p, m)
            M, K = assemble_mass(space), assemble_stiffness(space)
            basis = compute_splitting(space, M)
            grams = subspace_gram(basis, M, K)
            A = build_operator(space, d, M, K)
            modes = [("theory", sigma_theory(space.h), 1.05)]
            if p >= 2:
                modes.append(("preset", sigma_preset(space.h, d, p), 2.0))
            for label, sigma, bound in modes:
                lam, _ = estimate_smoother_spectrum(build_smoother(basis, grams, d, sigma), A, iters=40)
                yield CheckResult("smoother", f"lambda_max_{label}", lam, bound, {"d": d, "p": p, "m": m})


def suite_kron(max_p: int, max_level: int):
    rng = np.random.default_rng(1)
    for d, p, m in _oracle_cases(max_p):
        space = make_space(p, m)
        M, K = assemble_mass(space), assemble_stiffness(space)
        A = build_operator(space, d, M, K)
        par = {"d": d, "p": p, "m": m}
        x = rng.standard_normal(A.size)
        yield CheckResult("kron", "operator_apply", _rel(tensor_op_apply(A, x), A.to_dense() @ x),
                          ORACLE_TOL, par)
        facs = tuple(K if i == 0 else M for i in range(d))
        yield CheckResult("kron", "kron_apply", _rel(kron_apply(facs, x), kron_dense(facs) @ x),
                          ORACLE_TOL, par)
        shifted = tuple(M * (1.0 + i) for i in range(d))
        sol = kron_solve(tuple(factorize(F) for F in shifted), x)
        yield CheckResult("kron", "kron_solve", _rel(sol, np.linalg.solve(kron_dense(shifted), x)),
                          ORACLE_TOL, par)


def suite_coarse_approx(max_p: int, max_level: int):
    top = min(6, max_level)
    c1 = {}
    for p in range(2, min(8, max_p) + 1):
        hier = build_hierarchy(1, p, top) if top >= 3 else None
        if hier is None:
            break
        for l in range(max(3, hier.l0 + 1), top + 1):
            c = coarse_approx_check(hier, l)
            c1[(p, l)] = c
            yield CheckResult("coarse-approx", "c_emp", c, 10.0, {"d": 1, "p": p, "level": l})
    if (2, 3) in c1:
        c2 = coarse_approx_check(build_hierarchy(2, 2, 3), 3)
        yield CheckResult("coarse-approx", "d2_over_d1", c2 / c1[(2, 3)], 2.0,
                          {"d": 2, "p": 2, "level": 3})


SUITES = {
    "splitting": suite_splitting,
    "smoother": suite_smoother,
    "kron": suite_kron,
    "coarse-approx": suite_coarse_approx,
}


def run_suite(name: str, max_p: int = 14, max_level: int = 8) -> list[CheckResult]:
    if name == "all":
        return [r for s in SUITES for r in run_suite(s, max_p, max_level)]
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}")
    return list(SUITES[name](max_p, max_level))
