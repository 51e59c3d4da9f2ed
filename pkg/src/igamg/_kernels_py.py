"""NumPy/SciPy implementations of the axis kernels.

Every kernel takes a C-contiguous float64 array ``x`` of shape
``(pre, n, post)`` and acts on the middle axis.  The compiled module
``igamg._kernels`` provides the same functions.
"""
import numpy as np
import scipy.linalg


def band_matvec(ab, x):
    """``y = A x`` along axis 1, ``A`` symmetric in lower band layout."""
    n = x.shape[1]
    bw = ab.shape[0] - 1
    y = ab[0][None, :, None] * x
    for k in range(1, min(bw, n - 1) + 1):
        d = ab[k, : n - k][None, :, None]
        y[:, k:, :] += d * x[:, : n - k, :]
        y[:, : n - k, :] += d * x[:, k:, :]
    return y


def band_cho_solve(cb, x):
    """Solve ``L L^T y = x`` along axis 1, ``L`` lower band Cholesky factor."""
    pre, n, post = x.shape
    b = np.ascontiguousarray(x.transpose(1, 0, 2)).reshape(n, pre * post)
    y = scipy.linalg.cho_solve_banded((cb, True), b, check_finite=False)
    return np.ascontiguousarray(y.reshape(n, pre, post).transpose(1, 0, 2))


def csr_matvec(indptr, indices, data, nrows, x):
    """``y = S x`` along axis 1 for a CSR matrix with ``nrows`` rows."""
    pre, n, post = x.shape
    import scipy.sparse

    S = scipy.sparse.csr_matrix((data, indices, indptr), shape=(nrows, n))
    b = np.ascontiguousarray(x.transpose(1, 0, 2)).reshape(n, pre * post)
    y = S @ b
    return np.ascontiguousarray(y.reshape(nrows, pre, post).transpose(1, 0, 2))
