"""Pure-Python reference implementations of the hot loops.

These are selected at import time when the compiled extension is missing,
and they serve as the oracle for the extension in the test suite.
"""

import numpy as np


def toeplitz_solve(f, A, B, c0a, c0b):
    """Forward substitution for a product-trapezoid Volterra system on a uniform grid.

    Solves ``y_i = f_i + c0a_i y_1 + c0b_i y_0 + sum_{c=1}^{i-1} (A[i-c-1] y_{c+1} + B[i-c-1] y_c)``
    for ``i >= 1`` with ``y_0 = f_0``.  ``c0a``/``c0b`` carry the first-cell
    weights so that singular profiles can replace them.
    """
    f = np.asarray(f, dtype=complex)
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    n = f.shape[0] - 1
    y = np.zeros(n + 1, dtype=complex)
    y[0] = f[0] if np.isfinite(f[0]) else 0.0
    for i in range(1, n + 1):
        s = f[i] + c0b[i] * y[0]
        diag = c0a[i] if i == 1 else A[0]
        if i >= 2:
            s += c0a[i] * y[1]
            # cells c = 1 .. i-1; the c = i-1 cell holds the implicit y_i
            c = np.arange(1, i - 1)
            if c.size:
                s += np.dot(A[i - c - 1], y[c + 1])
            c = np.arange(1, i)
            s += np.dot(B[i - c - 1], y[c])
        y[i] = s / (1.0 - diag)
    return y


def tri_solve(W, f):
    """Solve ``y_i = f_i + sum_{c<=i} W[i, c] y_c`` by forward substitution."""
    W = np.asarray(W, dtype=complex)
    f = np.asarray(f, dtype=complex)
    n = f.shape[0]
    y = np.zeros(n, dtype=complex)
    for i in range(n):
        s = f[i] + np.dot(W[i, :i], y[:i])
        y[i] = s / (1.0 - W[i, i])
    return y


def hankel_fill(phi_ext, A, B, psi, first, nrows, ncols):
    """Kernel values ``k[i, j]`` on a uniform grid by the shift recurrence.

    ``phi_ext[m]`` is the profile at ``m h`` for ``m <= nrows + ncols``,
    ``first[m]`` the first-cell contribution at target ``(m + 1) h`` and
    ``A``/``B`` the regular cell weights indexed by the offset of the cell.
    Uses ``S(i+1, j) = S(i, j+1) + A[j] psi[i+1] + B[j] psi[i]``.
    """
    phi_ext = np.asarray(phi_ext, dtype=complex)
    width = nrows + ncols
    S = np.zeros(width, dtype=complex)
    out = np.empty((nrows, ncols), dtype=complex)
    out[0] = phi_ext[:ncols]
    if nrows > 1:
        S[: width - 1] = first[: width - 1]
        out[1] = phi_ext[1:ncols + 1] + S[:ncols]
    for i in range(1, nrows - 1):
        m = width - i - 1
        S[: m - 1] = S[1:m] + A[: m - 1] * psi[i + 1] + B[: m - 1] * psi[i]
        out[i + 1] = phi_ext[i + 1:i + 1 + ncols] + S[:ncols]
    return out


def trap_conv(f, g, h):
    """Uniform-grid trapezoid convolution ``(f*g)(x_i)``."""
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    n = f.shape[0]
    full = np.convolve(f, g)[:n]
    return h * (full - 0.5 * (f * g[0] + f[0] * g))
