# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled axis kernels.  Same contract as ``igamg._kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def band_matvec(const double[:, ::1] ab, const double[:, :, ::1] x):
    cdef Py_ssize_t pre = x.shape[0], n = x.shape[1], post = x.shape[2]
    cdef Py_ssize_t bw = ab.shape[0] - 1
    cdef Py_ssize_t a, i, j, k, c
    cdef double v
    out = np.zeros((pre, n, post))
    if post == 1:
        _band_matvec_rows(ab, np.asarray(x).reshape(pre, n), out.reshape(pre, n))
        return out
    cdef double[:, :, ::1] y = out
    for a in range(pre):
        for i in range(n):
            v = ab[0, i]
            for c in range(post):
                y[a, i, c] += v * x[a, i, c]
            for k in range(1, bw + 1):
                j = i - k
                if j < 0:
                    break
                v = ab[k, j]
                for c in range(post):
                    y[a, i, c] += v * x[a, j, c]
                    y[a, j, c] += v * x[a, i, c]
    return out


def band_cho_solve(const double[:, ::1] cb, const double[:, :, ::1] x):
    cdef Py_ssize_t pre = x.shape[0], n = x.shape[1], post = x.shape[2]
    cdef Py_ssize_t bw = cb.shape[0] - 1
    cdef Py_ssize_t a, i, k, c, kmax
    cdef double v, dinv
    if post == 1 and pre > 1:
        # independent rows: solve them as columns so the inner loop vectorizes
        xt = np.ascontiguousarray(np.asarray(x).reshape(pre, n).T).reshape(1, n, pre)
        return np.ascontiguousarray(band_cho_solve(cb, xt).reshape(n, pre).T).reshape(pre, n, 1)
    out = np.array(x, dtype=np.float64, order="C", copy=True)
    cdef double[:, :, ::1] y = out
    for a in range(pre):
        # forward: L z = b
        for i in range(n):
            kmax = bw if bw < i else i
            for k in range(1, kmax + 1):
                v = cb[k, i - k]
                for c in range(post):
                    y[a, i, c] -= v * y[a, i - k, c]
            dinv = 1.0 / cb[0, i]
            for c in range(post):
                y[a, i, c] *= dinv
        # backward: L^T y = z
        for i in range(n - 1, -1, -1):
            kmax = bw if bw < n - 1 - i else n - 1 - i
            for k in range(1, kmax + 1):
                v = cb[k, i]
                for c in range(post):
                    y[a, i, c] -= v * y[a, i + k, c]
            dinv = 1.0 / cb[0, i]
            for c in range(post):
                y[a, i, c] *= dinv
    return out


cdef void _band_matvec_rows(const double[:, ::1] ab, const double[:, ::1] x,
                            double[:, ::1] y) noexcept nogil:
    # last-axis case: scalar accumulation along contiguous rows
    cdef Py_ssize_t pre = x.shape[0], n = x.shape[1], bw = ab.shape[0] - 1
    cdef Py_ssize_t a, i, k
    cdef double s, xi, v
    for a in range(pre):
        for i in range(n):
            xi = x[a, i]
            s = ab[0, i] * xi
            for k in range(1, bw + 1):
                if k > i:
                    break
                v = ab[k, i - k]
                s += v * x[a, i - k]
                y[a, i - k] += v * xi
            y[a, i] += s


def csr_matvec(const int[::1] indptr, const int[::1] indices, const double[::1] data,
               Py_ssize_t nrows, const double[:, :, ::1] x):
    cdef Py_ssize_t pre = x.shape[0], post = x.shape[2]
    cdef Py_ssize_t a, i, idx, j, c
    cdef double v
    out = np.zeros((pre, nrows, post))
    cdef double[:, :, ::1] y = out
    for a in range(pre):
        for i in range(nrows):
            for idx in range(indptr[i], indptr[i + 1]):
                j = indices[idx]
                v = data[idx]
                for c in range(post):
                    y[a, i, c] += v * x[a, j, c]
    return out
