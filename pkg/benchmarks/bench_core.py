"""Timing of the compiled core against the pure-Python fallback.

Inputs mimic the calls made by the Volterra solver and the kernel fill for
``phi = exp(-2x)`` on a uniform grid.  Each loop is checked for agreement
before it is timed.

    python benchmarks/bench_core.py [--n 512 1024 2048] [--repeat 3]
"""

import argparse
import timeit

import numpy as np

from shiftpert import _pycore
from shiftpert.profiles import ProfileFunction
from shiftpert.volterra import uniform_weights

try:
    from shiftpert import _ccore
except ImportError:  # extension not built
    _ccore = None


def inputs(n):
    phi = ProfileFunction.exponential(1.0, 2.0)
    h = 20.0 / n
    x = h * np.arange(n + 1)
    A, B = uniform_weights(phi, h, 2 * n + 2)
    f = phi(x).astype(complex)
    c0a = np.concatenate([[0.0], A[:n]]).astype(complex)
    c0b = np.concatenate([[0.0], B[:n]]).astype(complex)
    psi = np.exp(-x).astype(complex)
    rows = n // 2
    phi_ext = phi(h * np.arange(rows + n + 2)).astype(complex)
    first = psi[1] * A + psi[0] * B
    rng = np.random.default_rng(0)
    W = np.tril(rng.normal(size=(n + 1, n + 1)) * h / n).astype(complex)
    return {
        "toeplitz_solve": (f, A, B, c0a, c0b),
        "tri_solve": (W, f),
        "hankel_fill": (phi_ext, A, B, psi, first, rows, n + 1),
        "trap_conv": (f, psi, h),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--n", type=int, nargs="+", default=[256, 512, 1024])
    p.add_argument("--repeat", type=int, default=3)
    a = p.parse_args(argv)
    if _ccore is None:
        print("compiled core not available; build with `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'loop':<16}{'n':>6}{'python [s]':>13}{'cython [s]':>13}{'speedup':>10}{'max diff':>11}")
    for n in a.n:
        for name, args in inputs(n).items():
            fp, fc = getattr(_pycore, name), getattr(_ccore, name)
            diff = np.max(np.abs(np.asarray(fp(*args)) - np.asarray(fc(*args))))
            tp = min(timeit.repeat(lambda: fp(*args), number=1, repeat=a.repeat))
            tc = min(timeit.repeat(lambda: fc(*args), number=1, repeat=a.repeat))
            print(f"{name:<16}{n:>6}{tp:>13.4f}{tc:>13.4f}{tp / tc:>10.1f}{diff:>11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
