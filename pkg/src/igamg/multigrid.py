"""Geometric multigrid on dyadically refined tensor-product spline spaces.

Two-grid, V- and W-cycles with the subspace-correction smoother, and
conjugate gradients preconditioned by one V-cycle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .model_problem import assemble_rhs, build_mass_operator, build_operator
from .smoother import SubspaceSmoother, apply_smoother_inverse, build_smoother, sigma_preset, sigma_theory
from .spline_core import (
    BandedSymMatrix,
    SplineSpace,
    assemble_mass,
    assemble_stiffness,
    make_space,
    prolongation,
)
from .splitting import SplittingBasis, SubspaceGrams, compute_splitting, subspace_gram
from .tensor_linalg import TensorOperator, _flops, kron_apply, kron_dense, tensor_op_apply

__all__ = [
    "SolverConfig",
    "Level",
    "MultigridHierarchy",
    "SolveResult",
    "DivergenceError",
    "coarsest_level",
    "resolve_sigma",
    "build_hierarchy",
    "smooth",
    "cycle",
    "solve_mg",
    "solve_pcg",
    "coarse_approx_check",
    "initial_guess",
]


class DivergenceError(RuntimeError):
    """Iteration limit reached (or PCG breakdown) before the tolerance was met."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class SolverConfig:
    cycle: str = "V"
    nu_pre: int = 1
    nu_post: int = 1
    tau: float = 1.0
    sigma_mode: str | float = "preset"
    tol: float = 1e-8
    max_iter: int = 500
    solver: str = "mg"

    def __post_init__(self):
        cyc = str(self.cycle).lower()
        names = {"v": "V", "w": "W", "twogrid": "twogrid"}
        if cyc not in names:
            raise ValueError(f"unknown cycle {self.cycle!r}")
        object.__setattr__(self, "cycle", names[cyc])
        if self.solver not in ("mg", "pcg"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.nu_pre < 0 or self.nu_post < 0 or self.nu_pre + self.nu_post < 1:
            raise ValueError("need nu_pre, nu_post >= 0 and nu_pre + nu_post >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if isinstance(self.sigma_mode, str) and self.sigma_mode not in ("theory", "preset"):
            raise ValueError(f"unknown sigma mode {self.sigma_mode!r}")
        if not isinstance(self.sigma_mode, str) and not self.sigma_mode > 0:
            raise ValueError("explicit sigma coefficient must be positive")


def resolve_sigma(mode, h: float, d: int, p: int = 2) -> float:
    """``sigma`` for mesh size ``h``; a number is read as the coefficient of ``h^-2``."""
    if mode == "theory":
        return sigma_theory(h)
    if mode == "preset":
        return sigma_preset(h, d, p)
    return float(mode) / h**2


def coarsest_level(p: int) -> int:
    """Smallest level such that every finer level satisfies ``2^l >= p + 1``."""
    return max(0, math.ceil(math.log2(p + 1)) - 1)


@dataclass(eq=False)
class Level:
    level: int
    space: SplineSpace
    M: BandedSymMatrix
    K: BandedSymMatrix
    A: TensorOperator
    basis: SplittingBasis | None = None
    grams: SubspaceGrams | None = None
    smoother: SubspaceSmoother | None = None
    # univariate prolongation from the next coarser level
    P: object = None
    PT: object = None


@dataclass(eq=False)
class MultigridHierarchy:
    d: int
    p: int
    levels: list  # index i holds level l0 + i
    l0: int
    sigma_mode: object
    _coarse_solvers: dict = field(default_factory=dict)

    @property
    def finest(self) -> Level:
        return self.levels[-1]

    @property
    def L(self) -> int:
        return self.levels[-1].level

    def level(self, l: int) -> Level:
        return self.levels[l - self.l0]

    def prolong(self, l: int, x: np.ndarray) -> np.ndarray:
        """Coarse (l-1) to fine (l)."""
        lev = self.level(l)
        return kron_apply((lev.P,) * self.d, x)

    def restrict(self, l: int, r: np.ndarray) -> np.ndarray:
        lev = self.level(l)
        return kron_apply((lev.PT,) * self.d, r)

    def coarse_solve(self, l: int, f: np.ndarray) -> np.ndarray:
        """Exact solve on level ``l`` (dense Cholesky when small, sparse LU otherwise)."""
        solver = self._coarse_solvers.get(l)
        if solver is None:
            A = self.level(l).A
            if A.size <= 4000:
                c = scipy.linalg.cho_factor(A.to_dense(), lower=True)
                _flops("factor", A.size**3 // 3)

                def solver(b, c=c, N=A.size):
                    _flops("dense_solve", 2 * N * N)
                    return scipy.linalg.cho_solve(c, b, check_finite=False)
            else:
                lu = scipy.sparse.linalg.splu(A.to_sparse().tocsc())
                solver = lu.solve
            self._coarse_solvers[l] = solver
        return solver(f)


def build_hierarchy(d: int, p: int, L: int, sigma_mode="preset", l0: int | None = None) -> MultigridHierarchy:
    l0 = coarsest_level(p) if l0 is None else l0
    if L < l0:
        raise ValueError(f"level {L} is below the coarsest admissible level {l0} for p={p}")
    levels = []
    prev_space = None
    for l in range(l0, L + 1):
        space = make_space(p, 2**l)
        M = assemble_mass(space)
        K = assemble_stiffness(space)
        lev = Level(l, space, M, K, build_operator(space, d, M, K))
        if l > l0:
            lev.basis = compute_splitting(space, M)
            lev.grams = subspace_gram(lev.basis, M, K)
            sigma = resolve_sigma(sigma_mode, space.h, d, p)
            lev.smoother = build_smoother(lev.basis, lev.grams, d, sigma)
            lev.P = prolongation(prev_space, space)
            lev.PT = lev.P.T.tocsr()
        levels.append(lev)
        prev_space = space
    return MultigridHierarchy(d=d, p=p, levels=levels, l0=l0, sigma_mode=sigma_mode)


def smooth(hier: MultigridHierarchy, l: int, u: np.ndarray, f: np.ndarray, steps: int,
           tau: float = 1.0) -> np.ndarray:
    """``steps`` damped Richardson updates ``u += tau L^{-1} (f - A u)``."""
    lev = hier.level(l)
    for _ in range(steps):
        r = f - tensor_op_apply(lev.A, u)
        u = u + tau * apply_smoother_inverse(lev.smoother, r)
    return u


def cycle(hier: MultigridHierarchy, l: int, u: np.ndarray, f: np.ndarray, config: SolverConfig) -> np.ndarray:
    """One multigrid iteration on level ``l``."""
    if l == hier.l0:
        return hier.coarse_solve(l, f)
    lev = hier.level(l)
    u = smooth(hier, l, u, f, config.nu_pre, config.tau)
    r = f - tensor_op_apply(lev.A, u)
    rc = hier.restrict(l, r)
    if config.cycle == "twogrid" or l - 1 == hier.l0:
        ec = hier.coarse_solve(l - 1, rc)
    else:
        gamma = 2 if config.cycle == "W" else 1
        ec = np.zeros_like(rc)
        for _ in range(gamma):
            ec = cycle(hier, l - 1, ec, rc, config)
    u = u + hier.prolong(l, ec)
    return smooth(hier, l, u, f, config.nu_post, config.tau)


@dataclass
class SolveResult:
    u: np.ndarray
    iterations: int
    residual_history: list
    converged: bool

    @property
    def relative_residual(self) -> float:
        r0 = self.residual_history[0]
        return 0.0 if r0 == 0 else self.residual_history[-1] / r0

    @property
    def contraction(self) -> float:
        if self.iterations == 0:
            return 0.0
        return self.relative_residual ** (1.0 / self.iterations)


def initial_guess(size: int, kind: str = "random", seed: int = 0) -> np.ndarray:
    """Starting vector: zero, or uniform on [0, 1) from a seeded generator."""
    if kind == "zero":
        return np.zeros(size)
    if kind == "random":
        return np.random.default_rng(seed).random(size)
    raise ValueError(f"unknown initial guess {kind!r}")


def solve_mg(hier: MultigridHierarchy, f: np.ndarray, config: SolverConfig | None = None,
             u0: np.ndarray | None = None, raise_on_divergence: bool = True) -> SolveResult:
    """Iterate cycles until ``||f - A u|| <= tol ||f - A u0||`` (``u0 = 0`` by default)."""
    config = SolverConfig() if config is None else config
    A = hier.finest.A
    u = np.zeros(A.size) if u0 is None else np.array(u0, dtype=float)
    r = f - tensor_op_apply(A, u)
    hist = [float(np.linalg.norm(r))]
    fn = hist[0]
    it = 0
    while hist[-1] > config.tol * fn and it < config.max_iter:
        u = cycle(hier, hier.L, u, f, config)
        r = f - tensor_op_apply(A, u)
        hist.append(float(np.linalg.norm(r)))
        it += 1
        if not np.isfinite(hist[-1]):
            break
    result = SolveResult(u, it, hist, bool(hist[-1] <= config.tol * fn))
    if not result.converged and raise_on_divergence:
        raise DivergenceError(f"no convergence after {it} iterations", result)
    return result


def vcycle_preconditioner(hier: MultigridHierarchy, config: SolverConfig):
    cfg = SolverConfig(cycle="V", nu_pre=config.nu_pre, nu_post=config.nu_post, tau=config.tau,
                       sigma_mode=config.sigma_mode, tol=config.tol, max_iter=config.max_iter)

    def apply(r):
        return cycle(hier, hier.L, np.zeros_like(r), r, cfg)

    return apply


def solve_pcg(hier: MultigridHierarchy, f: np.ndarray, config: SolverConfig | None = None,
              u0: np.ndarray | None = None, raise_on_divergence: bool = True) -> SolveResult:
    """Conjugate gradients preconditioned with one V-cycle (applied from a zero guess).

    Stops when ``||f - A u|| <= tol ||f - A u0||``.
    """
    config = SolverConfig(solver="pcg") if config is None else config
    if config.nu_pre != config.nu_post:
        raise ValueError("PCG needs nu_pre == nu_post for a symmetric preconditioner")
    A = hier.finest.A
    B = vcycle_preconditioner(hier, config)
    u = np.zeros(A.size) if u0 is None else np.array(u0, dtype=float)
    r = f - tensor_op_apply(A, u)
    hist = [float(np.linalg.norm(r))]
    fn = hist[0]
    it = 0
    if hist[-1] <= config.tol * fn:
        return SolveResult(u, 0, hist, True)
    z = B(r)
    rz = float(r @ z)
    pdir = z.copy()
    converged = False
    while it < config.max_iter:
        if not rz > 0:
            result = SolveResult(u, it, hist, False)
            if raise_on_divergence:
                raise DivergenceError("PCG breakdown: preconditioner is not positive definite", result)
            return result
        Ap = tensor_op_apply(A, pdir)
        alpha = rz / float(pdir @ Ap)
        u = u + alpha * pdir
        r = r - alpha * Ap
        it += 1
        hist.append(float(np.linalg.norm(r)))
        if hist[-1] <= config.tol * fn:
            converged = True
            break
        if not np.isfinite(hist[-1]):
            break
        z = B(r)
        rz_new = float(r @ z)
        pdir = z + (rz_new / rz) * pdir
        rz = rz_new
    result = SolveResult(u, it, hist, converged)
    if not converged and raise_on_divergence:
        raise DivergenceError(f"PCG: no convergence after {it} iterations", result)
    return result


def coarse_approx_check(hier: MultigridHierarchy, l: int, max_unknowns: int = 5000) -> float:
    """Empirical ``c`` in ``||(I - T_c) u||_0 <= c h ||u||_A`` between levels l-1 and l.

    ``T_c`` is the A-orthogonal projector onto the coarse space, formed densely.
    """
    if l <= hier.l0 or l > hier.L:
        raise ValueError(f"level must lie in ({hier.l0}, {hier.L}]")
    lev = hier.level(l)
    N = lev.A.size
    if N > max_unknowns:
        raise ValueError(f"{N} unknowns exceed the dense limit of {max_unknowns}")
    A = lev.A.to_dense()
    Md = build_mass_operator(lev.space, hier.d, lev.M).to_dense()
    P = kron_dense((lev.P,) * hier.d)
    Ac = P.T @ A @ P
    T = P @ np.linalg.solve(Ac, P.T @ A)
    E = np.eye(N) - T
    B = E.T @ Md @ E
    B = 0.5 * (B + B.T)
    lam = scipy.linalg.eigh(B, lev.space.h**2 * A, eigvals_only=True)[-1]
    return float(np.sqrt(max(lam, 0.0)))
