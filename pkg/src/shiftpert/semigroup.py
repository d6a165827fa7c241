"""Shift, perturbation and perturbed semigroup operators on grid functions."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicSpline

from .transforms import AccuracyWarning
from .kernel import HalfDensity, PerturbationKernel, xi_vector
from .numerics import (DomainError, Grid, GridFunction, bilinear_pairing, eval_e_z, inner_product,
                       integrate_samples, norm, probe_family)


@dataclass(frozen=True, eq=False)
class PerturbedSemigroup:
    """``T_t = S_t + K_t`` with ``K_t f(x) = int k(t - x, y) f(y) dy`` for ``x < t``."""

    kernel: PerturbationKernel

    @property
    def grid(self) -> Grid:
        return self.kernel.grid


_GX, _GW = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Piecewise-linear function with explicit knots; a repeated knot is a jump.

    Zero outside ``[knots[0], knots[-1]]``.  With ``warp = (t, p)`` the pieces
    left of ``t`` are linear in ``(t - x)^p`` instead of ``x``, which resolves
    an endpoint behaviour ``c0 + c1 (t - x)^p`` at second order.
    """

    knots: np.ndarray
    values: np.ndarray
    warp: Optional[tuple] = None

    @classmethod
    def of(cls, f: GridFunction) -> "PiecewiseLinear":
        return cls(np.asarray(f.nodes, float), np.asarray(f.values, complex))

    def segments(self):
        k, v = self.knots, self.values
        m = np.diff(k) > 0
        return k[:-1][m], k[1:][m], v[:-1][m], v[1:][m]

    def _lam(self, x, lo, hi):
        lin = (x - lo) / (hi - lo)
        if self.warp is None:
            return lin
        te, p = self.warp
        v = lambda u: np.maximum(te - u, 0.0) ** p
        with np.errstate(all="ignore"):
            w = (v(lo) - v(x)) / (v(lo) - v(hi))
        return np.where(hi <= te, w, lin)

    def at(self, x, side: str = "right"):
        """Values at ``x``; at a jump ``side`` picks the one-sided limit."""
        x = np.atleast_1d(np.asarray(x, float))
        lo, hi, va, vb = self.segments()
        out = np.zeros(x.shape, dtype=complex)
        if lo.size == 0:
            return out
        if side == "right":
            j = np.searchsorted(lo, x, side="right") - 1
            j = np.where(x == hi[-1], lo.size - 1, j)
        else:
            j = np.searchsorted(hi, x, side="left")
            j = np.where(x == lo[0], 0, j)
        ok = (j >= 0) & (j < lo.size)
        jj = np.clip(j, 0, lo.size - 1)
        ok &= (x >= lo[jj]) & (x <= hi[jj])
        lam = self._lam(x, lo[jj], hi[jj])
        out[ok] = (va[jj] + lam * (vb[jj] - va[jj]))[ok]
        return out

    def shift(self, t: float, x_max: float) -> "PiecewiseLinear":
        """``S_t`` applied, truncated to ``[0, x_max]``."""
        if t == 0:
            return self
        if self.warp is not None:
            raise DomainError("shifting a warped function is not supported")
        k = np.concatenate([[0.0, t], self.knots + t])
        v = np.concatenate([[0.0, 0.0], self.values])
        return PiecewiseLinear(k, v).truncate(x_max)

    def truncate(self, x_max: float) -> "PiecewiseLinear":
        if self.knots[-1] <= x_max:
            return self
        keep = self.knots < x_max
        end = self.at(x_max, "left")
        return PiecewiseLinear(np.append(self.knots[keep], x_max),
                               np.append(self.values[keep], end), self.warp)

    def __add__(self, other: "PiecewiseLinear") -> "PiecewiseLinear":
        # the sum keeps a warp only where the other summand vanishes, which is
        # how it is used (S_t g is zero wherever K_t g is warped)
        if self.warp is not None and other.warp is not None:
            raise DomainError("cannot add two warped functions")
        k = np.union1d(self.knots, other.knots)
        kk = np.repeat(k, 2)
        vv = np.empty(kk.shape, dtype=complex)
        vv[0::2] = self.at(k, "left") + other.at(k, "left")
        vv[1::2] = self.at(k, "right") + other.at(k, "right")
        return PiecewiseLinear(kk, vv, self.warp or other.warp)

    def gauss(self, extra=()):
        """Gauss nodes, weights and values on the pieces refined by ``extra`` knots."""
        k = np.union1d(self.knots, np.asarray(extra, float))
        k = k[(k >= self.knots[0]) & (k <= self.knots[-1])]
        lo, hi = k[:-1], k[1:]
        half = 0.5 * (hi - lo)
        Y = (lo + half)[:, None] + half[:, None] * _GX
        # evaluate inside each piece, away from the jumps at the knots
        G = self.at(Y.ravel()).reshape(Y.shape)
        return lo, hi, Y, _GW * half[:, None], G


def pl_pairing(u: PiecewiseLinear, v: PiecewiseLinear, conjugate: bool = True) -> complex:
    """``int u conj(v)`` (or ``int u v``); exact unless a warp is present."""
    k = np.union1d(u.knots, v.knots)
    if u.warp is not None or v.warp is not None:
        lo, hi, Y, W, U = u.gauss(k)
        V = v.at(Y.ravel()).reshape(Y.shape)
        return complex(np.sum(W * U * (np.conj(V) if conjugate else V)))
    lo, hi = k[:-1], k[1:]
    a0, a1 = u.at(lo, "right"), u.at(hi, "left")
    b0, b1 = v.at(lo, "right"), v.at(hi, "left")
    if conjugate:
        b0, b1 = np.conj(b0), np.conj(b1)
    d = hi - lo
    return complex(np.sum(d / 6 * (2 * a0 * b0 + a0 * b1 + a1 * b0 + 2 * a1 * b1)))


def _first_piece(k: PerturbationKernel, a: np.ndarray, g: PiecewiseLinear, h: float, alpha: float):
    """``int_0^h k(a, y) g(y) dy`` with the ``y^-alpha`` factor as a quadrature weight."""
    out = np.zeros(a.shape[0], dtype=complex)
    gr = lambda y: g.at(y)[0]
    cplx = bool(np.any(g.values.imag != 0))
    for i, ai in enumerate(a):
        if ai <= 0:
            continue
        # smooth factor k(a, y) y^alpha, evaluated off the origin
        sm = lambda y: float(np.real(k.closed_form(ai, max(y, 1e-300)))) * max(y, 1e-300) ** alpha
        re = quad(lambda y: sm(y) * gr(y).real, 0.0, h, weight="alg", wvar=(-alpha, 0.0), limit=200,
                  epsabs=1e-14, epsrel=1e-12)[0]
        im = 0.0
        if cplx:
            im = quad(lambda y: sm(y) * gr(y).imag, 0.0, h, weight="alg", wvar=(-alpha, 0.0), limit=200,
                  epsabs=1e-14, epsrel=1e-12)[0]
        out[i] = re + 1j * im
    return out


def kernel_rows_apply(k: PerturbationKernel, a, g: PiecewiseLinear) -> np.ndarray:
    """``int k(a, y) g(y) dy`` for each ``a``.

    8-point Gauss rules on every piece of ``g`` refined by the kernel grid.
    Closed-form kernels are evaluated exactly, sampled ones bilinearly.  When
    the rows carry a ``y^-alpha`` singularity the piece touching ``y = 0`` uses
    a weighted adaptive rule.  For kernels whose rows tend to a point mass at
    ``y = 0`` the value at ``a = 0`` is ``g(0+)``.
    """
    a = np.atleast_1d(np.asarray(a, float))
    y = k.grid.nodes
    lo, hi, Y, W, G = g.gauss(y if k.closed_form is None else ())
    alpha = k.meta.get("y_singularity") if k.closed_form is not None else None
    first = np.flatnonzero(lo == 0.0) if alpha else np.array([], int)
    WG = W * G
    WG[first] = 0.0
    out = np.empty(a.shape[0], dtype=complex)
    if k.closed_form is not None:
        for c in range(0, a.shape[0], 32):
            with np.errstate(all="ignore"):
                K = k.closed_form(a[c:c + 32, None, None], Y[None])
            out[c:c + 32] = np.einsum("aij,ij->a", K, WG)
    else:
        Yf = Y.ravel()
        inside = Yf <= y[-1]
        for i, ai in enumerate(a):
            r = k.row(ai)
            r = np.where(np.isfinite(r), r, 0.0)
            R = np.where(inside, np.interp(Yf, y, r.real) + 1j * np.interp(Yf, y, r.imag), 0.0)
            out[i] = np.sum(R.reshape(Y.shape) * WG)
    for j in first:
        out += _first_piece(k, a, g, hi[j], alpha)
    if k.meta.get("row_limit") == "delta":
        out = np.where(a == 0, g.at(0.0, "right")[0], out)
    return out


def _rows_at(k: PerturbationKernel, a: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``k(a_i, Y_j)``: closed form, or rows interpolated linearly in ``y``."""
    if k.closed_form is not None:
        with np.errstate(all="ignore"):
            return np.asarray(k.closed_form(a[:, None], Y[None, :]), dtype=complex)
    y = k.grid.nodes
    out = np.zeros((a.shape[0], Y.shape[0]), dtype=complex)
    inside = Y <= y[-1]
    for i, ai in enumerate(a):
        r = k.row(ai)
        out[i, inside] = np.interp(Y[inside], y, r.real) + 1j * np.interp(Y[inside], y, r.imag)
    return out


def apply_shift(t: float, f: GridFunction) -> GridFunction:
    """``S_t f(x) = f(x - t)`` for ``x >= t`` and 0 below, by linear interpolation."""
    if t < 0:
        raise DomainError("shift needs t >= 0")
    if t == 0:
        return f
    x = f.nodes
    return GridFunction(f.grid, np.where(x >= t, f(x - t), 0.0))


def _check_t(k: PerturbationKernel, t: float):
    if t < 0 or (k.closed_form is None and t > k.x[-1] * (1 + 1e-12)) or t > k.grid.x_max * (1 + 1e-12):
        raise DomainError(f"t = {t} outside [0, {k.x[-1]}]")


def _apply_K_pl(k: PerturbationKernel, t: float, g: PiecewiseLinear) -> PiecewiseLinear:
    """``K_t g`` as a piecewise-linear function on the nodes below ``t``, with its jump at ``t``."""
    x = k.grid.nodes
    xs = x[x < t - 1e-14 * max(1.0, t)]
    if xs.size == 0:
        return PiecewiseLinear(np.array([0.0, k.grid.x_max]), np.zeros(2, complex))
    vals = kernel_rows_apply(k, np.append(t - xs, 0.0), g)
    knots = np.concatenate([xs, [t, t, k.grid.x_max]])
    p = k.meta.get("row_limit_exponent")
    return PiecewiseLinear(knots, np.concatenate([vals, [0.0, 0.0]]), (t, p) if p else None)


def apply_K(sg: PerturbedSemigroup, t: float, f: GridFunction) -> GridFunction:
    """``K_t f`` on the grid; identically zero on ``[t, x_max]``."""
    k = sg.kernel
    if f.grid != k.grid:
        raise DomainError("function and kernel live on different grids")
    _check_t(k, t)
    return GridFunction(f.grid, _apply_K_pl(k, t, PiecewiseLinear.of(f)).at(f.nodes))


def apply_T(sg: PerturbedSemigroup, t: float, f: GridFunction) -> GridFunction:
    return apply_shift(t, f) + apply_K(sg, t, f)


def verify_C1(sg: PerturbedSemigroup, t: float, pairs=None, seed: int = 0) -> dict:
    """Largest ``|<S_t f, T_t g> - <f, g>|`` over test pairs.

    The default pairs are all ordered pairs from the seeded probe family
    (three exponentials and two C2 bumps).  Inner products of the
    piecewise-linear interpolants are exact, so the residual measures the
    support of ``K_t g`` and the truncation of ``S_t f`` at ``x_max``.
    """
    if t < 0 or t > sg.grid.x_max / 2:
        raise DomainError("t must lie in [0, x_max/2]")
    if pairs is None:
        fam = probe_family(sg.grid, seed)
        pairs = [(f, g) for f in fam for g in fam]
    xm = sg.grid.x_max
    worst = 0.0
    for f, g in pairs:
        F, G = PiecewiseLinear.of(f), PiecewiseLinear.of(g)
        Sf = F.shift(t, xm)
        lhs = pl_pairing(Sf, G.shift(t, xm)) + pl_pairing(Sf, _apply_K_pl(sg.kernel, t, G))
        worst = max(worst, abs(lhs - pl_pairing(F, G)))
    return {"t": t, "pairs": len(pairs), "residual": worst}


def semigroup_residual(sg: PerturbedSemigroup, s: float, t: float, f: GridFunction) -> float:
    """``||K_{s+t} f - (K_s S_t + S_s K_t + K_s K_t) f||`` on the grid.

    ``K_t f`` is kept on the grid nodes below ``t`` (with its jump at ``t``),
    so the residual is the discretization error of that representation.
    """
    k = sg.kernel
    _check_t(k, s + t)
    if s < 0 or t < 0:
        raise DomainError("s and t must be nonnegative")
    if s == 0 or t == 0:
        return 0.0
    xm = k.grid.x_max
    g = PiecewiseLinear.of(f)
    Kt = _apply_K_pl(k, t, g)
    inner = g.shift(t, np.inf) + Kt
    # for x >= s only S_s K_t survives and both sides are the same row
    # k(s+t-x, .), so the residual lives on [0, s): the cocycle identity proper
    x = k.grid.nodes
    lo = x[x < s]
    a = np.append(lo, s)
    if k.meta.get("y_singularity") or k.meta.get("row_limit"):
        r = kernel_rows_apply(k, s + t - a, g) - kernel_rows_apply(k, s - a, inner)
    else:
        # smooth rows: K_s K_t f by nested Gauss rules, so K_t f is never
        # replaced by its interpolant (that alone costs O(h^2))
        kn = np.union1d(x[x < t], [t])
        half = 0.5 * np.diff(kn)
        Y = ((kn[:-1] + half)[:, None] + half[:, None] * _GX).ravel()
        W = (_GW * half[:, None]).ravel()
        KtY = kernel_rows_apply(k, t - Y, g)
        r = (kernel_rows_apply(k, s + t - a, g) - kernel_rows_apply(k, s - a, g.shift(t, np.inf))
             - _rows_at(k, s - a, Y) @ (W * KtY))
    P = PiecewiseLinear(np.concatenate([lo, [s, s, xm]]), np.concatenate([r, [0.0, 0.0]]))
    return float(np.sqrt(abs(pl_pairing(P, P))))


def shift_resolvent(z: complex, f: GridFunction) -> GridFunction:
    """``(zI - A)^{-1} f(x) = int_0^x f(u) exp(-z (x - u)) du``, exact for the linear interpolant."""
    z = complex(z)
    x = f.nodes
    h = np.diff(x)
    m0, m1 = _exp_moments(z, h)
    v = f.values
    e = np.exp(-z * h)
    out = np.zeros(x.shape[0], dtype=complex)
    for i in range(x.shape[0] - 1):
        out[i + 1] = e[i] * out[i] + v[i + 1] * (m0[i] - m1[i]) + v[i] * m1[i]
    return GridFunction(f.grid, out)


def _exp_moments(z: complex, h: np.ndarray):
    """``int_0^h exp(-z v) dv`` and ``int_0^h (v/h) exp(-z v) dv``."""
    a = z * h
    small = np.abs(a) < 1e-4
    with np.errstate(all="ignore"):
        e = np.exp(-a)
        m0 = np.where(small, h * (1 - a / 2 + a * a / 6), (1 - e) / z)
        m1 = np.where(small, h * (0.5 - a / 3 + a * a / 8), (1 - e * (1 + a)) / (z * z * h))
    return m0, m1


def resolvent_check(sg: PerturbedSemigroup, M: HalfDensity, z: complex, f: GridFunction,
                    growth: float = 0.0) -> dict:
    """Compare ``int_0^xmax exp(-z t) T_t f dt`` with ``(zI-A)^{-1} f + (f, xi) e_z``.

    The shift part of the time integral is the shift resolvent itself; the
    perturbation part equals ``exp(-z x) int_0^{xmax-x} exp(-z u) R(u) du``
    with ``R(u) = int k(u, y) f(y) dy``.  The tail beyond ``x_max`` is bounded
    assuming ``||T_t|| <= exp(growth t)``.
    """
    z = complex(z)
    grid = sg.grid
    x = grid.nodes
    g = PiecewiseLinear.of(f)
    R = kernel_rows_apply(sg.kernel, x, g)
    m0, m1 = _exp_moments(z, np.diff(x))
    cells = np.exp(-z * x[:-1]) * (R[:-1] * (m0 - m1) + R[1:] * m1)
    C = np.concatenate([[0.0], np.cumsum(cells)])
    U = x[-1] - x
    Cu = np.interp(U, x, C.real) + 1j * np.interp(U, x, C.imag)
    pert = np.exp(-z * x) * Cu
    xi = xi_vector(M, z, grid).values.values
    xi = np.asarray(xi, complex)
    if np.isfinite(xi[0]):
        pairing = pl_pairing(g, PiecewiseLinear(x, xi), conjugate=False)
    else:
        # integrable singularity of xi at 0: power-law first cell
        pairing = integrate_samples(f.values * xi, grid)
    diff = GridFunction(grid, pert - pairing * eval_e_z(z, grid).values)
    tail = norm(f) * np.exp((growth - z.real) * x[-1]) / max(z.real - growth, 1e-12)
    return {"z": [z.real, z.imag], "residual": norm(diff), "tail_bound": float(tail)}


def _y_tail(row_sq: np.ndarray, grid: Grid) -> np.ndarray:
    """Exponential-fit estimate of ``int_{x_max}^inf |k(x, y)|^2 dy`` per row."""
    a, b = row_sq[..., -2], row_sq[..., -1]
    h = grid.nodes[-1] - grid.nodes[-2]
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.log(a / b) / h
        tail = np.where((b > 0) & (c > 0), b / c, 0.0)
    return np.nan_to_num(tail)


def _powerlaw_cells(s: np.ndarray, f: np.ndarray, shift=0.0) -> np.ndarray:
    """Cell integrals of a positive sampled function under the model
    ``f = A (s + shift)^p`` between neighbouring samples.

    Exact for power laws in ``s + shift`` and for constants, second order
    otherwise; cells with a zero or non-finite end fall back to the trapezoid.
    """
    u = s + np.asarray(shift, float)[..., None]
    a, b = f[..., :-1], f[..., 1:]
    ua, ub = u[..., :-1], u[..., 1:]
    trap = 0.5 * (a + b) * (s[1:] - s[:-1])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = np.log(ub / ua)
        p = np.log(b / a) / r
        q = p + 1
        pw = np.where(np.abs(q) > 1e-8, (ub * b - ua * a) / q, ua * a * r)
    ok = (a > 0) & (b > 0) & np.isfinite(a) & np.isfinite(b) & (ua > 0) & np.isfinite(pw)
    return np.where(ok, pw, np.nan_to_num(trap))


def hs_density(sg: PerturbedSemigroup, tail: bool = True) -> np.ndarray:
    """``d(x_i) = int_0^inf |k(x_i, y)|^2 dy`` for each stored row.

    Trapezoid in ``y`` with one Richardson step on even uniform grids,
    a power-law first cell when ``k(x, 0)`` is infinite, and an
    exponential-fit estimate of the part beyond ``x_max``.
    """
    k = sg.kernel
    sq = np.abs(k.values) ** 2
    g = k.grid
    rich = g.is_uniform and g.n % 2 == 0
    d = np.empty(sq.shape[0])
    if not g.is_uniform:
        # rows are sharply peaked at y = 0 on the scale x; graded cells are
        # integrated with a local power law in x + y
        d[:] = _powerlaw_cells(g.nodes, sq, k.x[: sq.shape[0]]).sum(-1)
    else:
        fin = np.isfinite(sq[:, 0])
        if np.any(fin):
            d[fin] = np.real(integrate_samples(sq[fin], g, richardson=rich))
        if np.any(~fin):
            d[~fin] = np.real(integrate_samples(sq[~fin], g))
    if tail:
        d = d + _y_tail(sq, g)
    if k.x[0] == 0 and d.size > 1:
        # the row at x = 0 is phi itself; a local exponent <= -1 of |k(0, y)|^2
        # means it is not square integrable and the trapezoid value is spurious
        y1, y2 = g.nodes[1], g.nodes[2]
        a, b = sq[0, 1], sq[0, 2]
        if a > 0 and b > 0 and np.log(b / a) / np.log(y2 / y1) <= -1:
            d[0] = np.inf
    return d


def _density_integral(x: np.ndarray, d: np.ndarray, lo, hi):
    """``int_lo^hi d`` from samples: cubic spline, with a power-law model
    ``d ~ x^p`` on the first cell when ``d(0)`` is infinite.  A first cell with
    ``p <= -1`` makes integrals from 0 divergent (``inf``).
    """
    lo = np.broadcast_to(np.asarray(lo, float), np.shape(hi)).copy()
    hi = np.asarray(hi, float)
    dx = np.diff(x)
    if dx.max() > 1.5 * dx.min():
        return _powerlaw_int(x, d, lo, hi)
    if np.isfinite(d[0]):
        return _spline_int(x, d, lo, hi)
    x1, x2 = x[1], x[2]
    p = float(np.log(d[2] / d[1]) / np.log(x2 / x1))
    prim = lambda u: (d[1] * x1 ** -p * u ** (p + 1) / (p + 1) if p > -1
                      else np.where(u > 0, d[1] * x1 * np.log(u / x1) if p == -1 else
                                    d[1] * x1 ** -p * u ** (p + 1) / (p + 1), -np.inf))
    out = np.zeros(hi.shape)
    for i, (a, b) in enumerate(zip(lo.ravel(), hi.ravel())):
        head = 0.0
        if a < x1:
            head = float(prim(min(b, x1)) - prim(a))
        body = _spline_int(x[1:], d[1:], max(a, x1), b) if b > x1 else 0.0
        out.flat[i] = head + body
    return out


def _powerlaw_int(x, d, lo, hi):
    """``int_lo^hi d`` on graded nodes with the local power-law cell rule;
    end points inside a cell are handled by the cell's own power law."""
    x = np.asarray(x, float)
    d = np.asarray(d, float)
    first = x[0] == 0 and not np.isfinite(d[0])
    if first:
        # first cell from the exponent of the next one
        p = float(np.log(d[2] / d[1]) / np.log(x[2] / x[1]))
        head = d[1] * x[1] / (p + 1) if p > -1 else np.inf
        cells = np.concatenate([[head], _powerlaw_cells(x[1:], d[1:])])
    else:
        cells = _powerlaw_cells(x, d)
    cum = np.concatenate([[0.0], np.cumsum(cells)])

    def F(u):
        j = int(np.clip(np.searchsorted(x, u, side="right") - 1, 0, x.size - 2))
        if u <= x[j]:
            return cum[j]
        if j == 0 and first:
            return cum[0] + (head * (u / x[1]) ** (p + 1) if np.isfinite(head) else np.inf)
        part = _powerlaw_cells(np.array([x[j], u]),
                               np.array([d[j], np.interp(np.log(u), np.log(x[j:j + 2]), d[j:j + 2])
                                         if x[j] > 0 else np.interp(u, x[j:j + 2], d[j:j + 2])]))
        return cum[j] + float(part[0])

    lo, hi = np.broadcast_arrays(lo, hi)
    out = np.array([F(b) - F(a) if b > a else 0.0 for a, b in zip(lo.ravel(), hi.ravel())])
    return out.reshape(hi.shape)


def _spline_int(x, d, lo, hi):
    cs = CubicSpline(x, d)
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    return np.array([cs.integrate(a, b) if b > a else 0.0 for a, b in zip(lo.ravel(), hi.ravel())]
                    ).reshape(hi.shape)


def hs_norm(sg: PerturbedSemigroup, t: float) -> float:
    """Squared Hilbert-Schmidt norm ``int_0^t int_0^inf |k(x, y)|^2 dy dx``.

    Returns ``inf`` (with an :class:`AccuracyWarning`) when the density is
    not integrable at ``x = 0``.
    """
    k = sg.kernel
    if t < 0 or t > k.x[-1] * (1 + 1e-12):
        raise DomainError(f"t = {t} outside the kernel range")
    if t == 0:
        return 0.0
    d = hs_density(sg)
    v = float(_density_integral(k.x, d, 0.0, t))
    if k.closed_form is not None:
        # the grid cannot see the order of the singularity; ask the closed form
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            a, b = closed_density(k, 1e-12), closed_density(k, 1e-10)
        if a > 0 and b > 0 and np.log(b / a) / np.log(100.0) <= -1 + 1e-3:
            v = np.inf
    if not np.isfinite(v):
        warnings.warn("Hilbert-Schmidt density not integrable at x = 0", AccuracyWarning)
        v = np.inf
    return v


def closed_density(k: PerturbationKernel, x: float) -> float:
    """``int_0^inf |k(x, y)|^2 dy`` by adaptive quadrature of the closed form (``y = x u``)."""
    if k.closed_form is None:
        raise DomainError("closed_density needs a closed-form kernel")
    f = lambda u: float(np.abs(k.closed_form(x, x * max(u, 1e-300))) ** 2) * x
    alpha = k.meta.get("y_singularity")
    if alpha:
        w = lambda u: f(u) * max(u, 1e-300) ** (2 * alpha)
        head = quad(w, 0.0, 1.0, weight="alg", wvar=(-2 * alpha, 0.0), epsabs=0, epsrel=1e-11)[0]
    else:
        head = quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-11)[0]
    # beyond y = x integrate in y itself; in u the decay scale would be 1/x
    g = lambda y: float(np.abs(k.closed_form(x, y)) ** 2)
    return head + quad(g, x, np.inf, epsabs=0, epsrel=1e-11, limit=200)[0]


def hs_truncated(sg: PerturbedSemigroup, eps: float, t: float) -> float:
    """``int_eps^t int_0^inf |k(x, y)|^2 dy dx``.

    Closed-form kernels are integrated adaptively in ``log x``; sampled
    kernels use the grid density.
    """
    if not 0 < eps <= t:
        raise DomainError("need 0 < eps <= t")
    k = sg.kernel
    if k.closed_form is not None:
        g = lambda s: closed_density(k, np.exp(s)) * np.exp(s)
        return quad(g, np.log(eps), np.log(t), epsabs=0, epsrel=1e-10, limit=200)[0]
    return float(_density_integral(k.x, hs_density(sg), eps, t))


@dataclass
class HSCurve:
    t: np.ndarray
    value: np.ndarray
    laplace_x: np.ndarray
    laplace_value: np.ndarray
    exponent: float = float("nan")

    def write(self, csv_path, json_path=None, summary=None):
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "hs_sq"])
            for a, b in zip(self.t, self.value):
                w.writerow([f"{a:.17g}", f"{b:.17g}"])
        if json_path is not None:
            data = {"laplace_stieltjes": [[float(a), float(b)] for a, b in zip(self.laplace_x, self.laplace_value)],
                    "small_t_exponent": None if not np.isfinite(self.exponent) else float(self.exponent)}
            if summary:
                data.update(summary)
            with open(json_path, "w") as fh:
                json.dump(data, fh, indent=2, sort_keys=True)


def laplace_stieltjes(sg: PerturbedSemigroup, x: float) -> float:
    """``int_0^inf exp(-2 t x) d||K_t||^2`` through the density ``int |k(t, y)|^2 dy``."""
    ts = sg.kernel.x
    vals = np.exp(-2 * x * ts) * hs_density(sg)
    return float(_density_integral(ts, vals, 0.0, ts[-1]))


def small_t_exponent(t: np.ndarray, v: np.ndarray) -> float:
    """Least-squares slope of ``log v`` against ``log t``."""
    m = (t > 0) & (v > 0) & np.isfinite(v)
    if m.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(t[m]), np.log(v[m]), 1)[0])


def hs_curve(sg: PerturbedSemigroup, ts, xs=()) -> HSCurve:
    """Table of ``(t, ||K_t||_HS^2)``, the Laplace-Stieltjes transform at ``xs``
    and the log-log slope over the smallest decade of ``ts``."""
    ts = np.asarray(ts, dtype=float)
    k = sg.kernel
    if ts.size and (ts.min() < 0 or ts.max() > k.x[-1] * (1 + 1e-12)):
        raise DomainError("t-list outside the kernel range")
    d = hs_density(sg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        vals = _density_integral(k.x, d, 0.0, ts)
    ls = np.array([laplace_stieltjes(sg, x) for x in xs])
    pos = ts[ts > 0]
    small = ts <= (pos.min() * 10 if pos.size else 0)
    return HSCurve(ts, vals, np.asarray(xs, float), ls, small_t_exponent(ts[small], vals[small]))


def empirical_growth(sg: PerturbedSemigroup) -> float:
    """Exponential rate of ``||K_t||_HS`` fitted over the upper half of the range."""
    k = sg.kernel
    d = hs_density(sg)
    x = k.x
    m = x >= x[-1] / 2
    v = np.sqrt(np.maximum(_density_integral(x, d, 0.0, x[m]), 1e-300))
    slope = np.polyfit(x[m], np.log(v), 1)[0]
    return float(max(slope, 0.0))
