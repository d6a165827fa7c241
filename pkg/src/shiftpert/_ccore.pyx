# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the loops in ``_pycore``; same signatures and results."""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()


def toeplitz_solve(f, A, B, c0a, c0b):
    cdef const double complex[:] fv = np.ascontiguousarray(f, dtype=complex)
    cdef const double complex[:] Av = np.ascontiguousarray(A, dtype=complex)
    cdef const double complex[:] Bv = np.ascontiguousarray(B, dtype=complex)
    cdef const double complex[:] ca = np.ascontiguousarray(c0a, dtype=complex)
    cdef const double complex[:] cb = np.ascontiguousarray(c0b, dtype=complex)
    cdef Py_ssize_t n = fv.shape[0] - 1
    out = np.zeros(n + 1, dtype=complex)
    cdef double complex[:] y = out
    cdef Py_ssize_t i, c
    cdef double complex s, diag
    y[0] = fv[0] if (isfinite(fv[0].real) and isfinite(fv[0].imag)) else 0.0
    for i in range(1, n + 1):
        s = fv[i] + cb[i] * y[0]
        if i == 1:
            diag = ca[1]
        else:
            diag = Av[0]
            s = s + ca[i] * y[1]
            for c in range(1, i - 1):
                s = s + Av[i - c - 1] * y[c + 1]
            for c in range(1, i):
                s = s + Bv[i - c - 1] * y[c]
        y[i] = s / (1.0 - diag)
    return out


def tri_solve(W, f):
    cdef const double complex[:, :] Wv = np.ascontiguousarray(W, dtype=complex)
    cdef const double complex[:] fv = np.ascontiguousarray(f, dtype=complex)
    cdef Py_ssize_t n = fv.shape[0]
    out = np.zeros(n, dtype=complex)
    cdef double complex[:] y = out
    cdef Py_ssize_t i, c
    cdef double complex s
    for i in range(n):
        s = fv[i]
        for c in range(i):
            s = s + Wv[i, c] * y[c]
        y[i] = s / (1.0 - Wv[i, i])
    return out


def hankel_fill(phi_ext, A, B, psi, first, Py_ssize_t nrows, Py_ssize_t ncols):
    cdef const double complex[:] ph = np.ascontiguousarray(phi_ext, dtype=complex)
    cdef const double complex[:] Av = np.ascontiguousarray(A, dtype=complex)
    cdef const double complex[:] Bv = np.ascontiguousarray(B, dtype=complex)
    cdef const double complex[:] ps = np.ascontiguousarray(psi, dtype=complex)
    cdef const double complex[:] fi = np.ascontiguousarray(first, dtype=complex)
    cdef Py_ssize_t width = nrows + ncols
    S_arr = np.zeros(width, dtype=complex)
    cdef double complex[:] S = S_arr
    out_arr = np.empty((nrows, ncols), dtype=complex)
    cdef double complex[:, :] out = out_arr
    cdef Py_ssize_t i, j, m
    cdef double complex a, b
    for j in range(ncols):
        out[0, j] = ph[j]
    if nrows > 1:
        for j in range(width - 1):
            S[j] = fi[j]
        for j in range(ncols):
            out[1, j] = ph[1 + j] + S[j]
    for i in range(1, nrows - 1):
        m = width - i - 1
        a = ps[i + 1]
        b = ps[i]
        for j in range(m - 1):
            S[j] = S[j + 1] + Av[j] * a + Bv[j] * b
        for j in range(ncols):
            out[i + 1, j] = ph[i + 1 + j] + S[j]
    return out_arr


# np.convolve already runs a compiled loop and beats a plain double loop here
from ._pycore import trap_conv  # noqa: E402
