"""Independent oracles shared by the tests."""
import numpy as np
from scipy.interpolate import BSpline


def oracle_spline(space, coeffs):
    """The spline with B-spline coefficients ``coeffs`` as a scipy object."""
    return BSpline(space.knots, np.asarray(coeffs, dtype=float), space.p, extrapolate=False)


def oracle_gram(space, deriv, npts=None):
    """``∫ φ_i^(r) φ_j^(r)`` with scipy evaluation and a fine Gauss rule."""
    n = space.n
    xi, wi = np.polynomial.legendre.leggauss(space.p + 3)
    h = space.h
    x = (np.arange(space.m)[:, None] * h + 0.5 * h * (xi + 1)).ravel()
    w = np.tile(0.5 * h * wi, space.m)
    B = np.empty((len(x), n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        s = oracle_spline(space, e)
        B[:, j] = s.derivative(deriv)(x) if deriv else s(x)
    return B.T @ (w[:, None] * B)


def rel(a, b):
    nb = np.linalg.norm(b)
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / (nb if nb else 1.0)
