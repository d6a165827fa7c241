"""Resolvent profile of a convolution Volterra equation and convolution primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ._backend import core
from .numerics import Grid, GridFunction, GridMismatchError, norm, make_grid
from .profiles import ProfileFunction

GROWTH_SEARCH = tuple(2.0**k for k in range(11))


class InadmissibleProfileError(ValueError):
    """No exponential weight makes the profile's weighted L1 norm < 1."""


@dataclass(frozen=True, eq=False)
class ResolventProfile:
    """Solution ``psi`` of ``psi = phi + phi * psi`` on a grid.

    ``levels`` keeps the raw second-order solutions on the grid and on its
    2x refinement when ``psi`` itself is their Richardson combination.
    """

    psi: GridFunction
    growth: float
    phi: ProfileFunction
    levels: tuple = ()

    @property
    def grid(self) -> Grid:
        return self.psi.grid

    @property
    def extrapolated(self) -> bool:
        return bool(self.levels)


def refine(grid: Grid) -> Grid:
    """Grid with twice as many cells whose even nodes are the original ones."""
    return Grid(grid.x_max, 2 * grid.n, grid.scheme, grid.gamma)


def _check_same(f, g):
    if f.grid != g.grid:
        raise GridMismatchError("grid functions live on different grids")


def convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """Convolution ``(f*g)(x) = int_0^x f(x-s) g(s) ds`` by the trapezoid rule.

    On uniform grids the shifted samples fall on nodes; otherwise ``f`` is
    linearly interpolated at ``x_i - s``.
    """
    _check_same(f, g)
    grid = f.grid
    if grid.is_uniform:
        out = core.trap_conv(f.values, g.values, grid.x_max / grid.n)
        return GridFunction(grid, out)
    x = grid.nodes
    out = np.zeros(grid.n + 1, dtype=complex)
    for i in range(1, grid.n + 1):
        s = x[: i + 1]
        vals = f(x[i] - s) * g.values[: i + 1]
        out[i] = integrate.trapezoid(vals, s)
    return GridFunction(grid, out)


_GX, _GW = np.polynomial.legendre.leggauss(8)


def _finite(v):
    # integrable end-point singularities can be hit by round-off in u - s
    return v if np.isfinite(v) else 0.0


def _quad_complex(g, a, b, points=None, real=False):
    parts = []
    for comp in ((np.real,) if real else (np.real, np.imag)):
        v, _ = integrate.quad(lambda s: _finite(float(comp(g(s)))), a, b,
                              points=points or None, limit=400)
        parts.append(v)
    return complex(*parts)


def _log_power_cell(phi: ProfileFunction, a: float, b: float, u: float, weight):
    """``int_a^b phi(u - s) phi(s) weight(s) ds`` (``u >= b``) for the log-power profile.

    ``1/(s log(1/s)^beta)`` end-point singularities keep their mass at scales
    far below double precision.  A singular half of the cell is mapped to
    ``v in [0, inf)`` through the distance ``d = (b-a)/2 exp(-v)`` to its end,
    and ``d phi(d) = C / log(1/d)^beta`` is evaluated from ``log d``, so
    nothing underflows.  The left end is singular only when ``a = 0``, the
    right end only when ``u - b`` is small.
    """
    C, beta = phi.params
    half = 0.5 * (b - a)
    mid = a + half
    lh = math.log(half)
    gap = u - b
    lgap = math.log(gap) if gap > 0 else -math.inf
    real = phi.is_real

    def xphi(logx):
        return C / (-logx) ** beta if logx < -1.0 else 0.0

    def left(v):
        s = half * math.exp(-v)
        return xphi(lh - v) * phi.scalar(u - s) * weight(s)

    def right(v):
        ld = lh - v
        lr = np.logaddexp(lgap, ld)
        d = math.exp(ld)
        return xphi(lr) * math.exp(ld - lr) * phi.scalar(b - d) * weight(b - d)

    if a == 0:
        total = _quad_complex(left, 0.0, np.inf, None, real)
    else:
        total = _quad_complex(lambda s: phi.scalar(u - s) * phi.scalar(s) * weight(s), a, mid, None, real)
    if gap < half:
        total += _quad_complex(right, 0.0, np.inf, None, real)
    else:
        total += _quad_complex(lambda s: phi.scalar(u - s) * phi.scalar(s) * weight(s), mid, b, None, real)
    return total


def _first_cell(phi: ProfileFunction, h1: float, u):
    """First-cell integrals for singular profiles.

    On ``[0, h1]`` the resolvent is modelled as ``phi(s) (l0(s) + rho1 l1(s))``
    with hat functions ``l0, l1``; ``psi/phi -> 1`` at the origin fixes the
    left coefficient.  Returns ``(J0, J1)`` with
    ``Jk(u) = int_0^h1 phi(u - s) phi(s) lk(s) ds``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    J0 = np.zeros(u.shape, dtype=complex)
    J1 = np.zeros(u.shape, dtype=complex)
    far = u >= 8 * h1
    I0, I1 = phi.cell_moments(np.array([0.0]), np.array([h1]))
    I0, I1 = I0[0], I1[0]
    J0[far] = phi(u[far]) * (I0 - I1 / h1)
    J1[far] = phi(u[far] - h1) * I1 / h1
    f, real = phi.scalar, phi.is_real
    for k in np.nonzero(~far)[0]:
        uk = u[k]
        pts = [b for b in phi.breakpoints if 0 < b < h1]
        pts += [uk - b for b in phi.breakpoints if 0 < uk - b < h1]
        if phi.form == "log-power" and not pts:
            J0[k] = _log_power_cell(phi, 0.0, h1, uk, lambda s: 1 - s / h1)
            J1[k] = _log_power_cell(phi, 0.0, h1, uk, lambda s: s / h1)
            continue
        J0[k] = _quad_complex(lambda s: f(uk - s) * f(s) * (1 - s / h1), 0.0, h1, pts, real)
        J1[k] = _quad_complex(lambda s: f(uk - s) * f(s) * (s / h1), 0.0, h1, pts, real)
    return J0, J1


def _singular_span(phi: ProfileFunction, grid: Grid) -> int:
    """Number of cells on which ``psi/phi`` is interpolated instead of ``psi``."""
    s_star = min([b for b in phi.breakpoints if b > 0] + [grid.x_max])
    return int(np.searchsorted(grid.nodes, s_star, side="right")) - 1


def conv_rows(phi: ProfileFunction, grid: Grid, i: int, u):
    """Quadrature weights for ``int_0^{x_i} phi(u - s) psi(s) ds``.

    Returns ``(W, const)`` such that the integral is ``W @ psi[:i+1] + const``
    for each target ``u`` (``u >= x_i``).  Regular cells use product
    integration (exact ``phi`` moments against piecewise linear ``psi``).
    For singular profiles, cells near the origin interpolate ``psi/phi``
    instead and use an 8-point Gauss rule on the smooth product.
    """
    x = grid.nodes
    u = np.atleast_1d(np.asarray(u, dtype=float))
    nt = u.shape[0]
    W = np.zeros((nt, i + 1), dtype=complex)
    const = np.zeros(nt, dtype=complex)
    if i == 0:
        return W, const
    c = np.arange(i)
    hc = x[c + 1] - x[c]
    lo = u[:, None] - x[c + 1][None, :]
    hi = u[:, None] - x[c][None, :]
    moment = np.ones((nt, i), dtype=bool)
    if phi.singular:
        moment[:, 0] = False
        J0, J1 = _first_cell(phi, x[1], u)
        const += J0
        W[:, 1] += J1 / phi(x[1])
        span = _singular_span(phi, grid)
        gauss = (c[None, :] >= 1) & (c[None, :] < span) & (lo >= hc[None, :])
        moment &= ~gauss
        # cells touching the target where psi is far from linear: adaptive quadrature
        ratio = x[c + 1] / np.where(x[c] > 0, x[c], np.inf)
        adj = (c[None, :] >= 1) & (c[None, :] < span) & (lo < hc[None, :]) & (ratio[None, :] > 1.2)
        moment &= ~adj
        f, real = phi.scalar, phi.is_real
        for t_, c_ in zip(*np.nonzero(adj)):
            a, b, ut = x[c_], x[c_ + 1], u[t_]
            pts = [p for p in (ut - bp for bp in phi.breakpoints) if a < p < b]
            if phi.form == "log-power" and not pts:
                gl = _log_power_cell(phi, a, b, ut, lambda s: (b - s) / (b - a))
                gr = _log_power_cell(phi, a, b, ut, lambda s: (s - a) / (b - a))
            else:
                gl = _quad_complex(lambda s: f(ut - s) * f(s) * (b - s) / (b - a), a, min(b, ut), pts, real)
                gr = _quad_complex(lambda s: f(ut - s) * f(s) * (s - a) / (b - a), a, min(b, ut), pts, real)
            W[t_, c_] += gl / phi(a)
            W[t_, c_ + 1] += gr / phi(b)
        tt, cc = np.nonzero(gauss)
        if tt.size:
            a, b = x[cc], x[cc + 1]
            half = 0.5 * (b - a)
            s = (a + half)[:, None] + half[:, None] * _GX
            prod = phi(u[tt][:, None] - s) * phi(s) * _GW * half[:, None]
            l1 = (s - a[:, None]) / (b - a)[:, None]
            g_left = (prod * (1 - l1)).sum(1) / phi(a)
            g_right = (prod * l1).sum(1) / phi(b)
            np.add.at(W, (tt, cc), g_left)
            np.add.at(W, (tt, cc + 1), g_right)
    tt, cc = np.nonzero(moment)
    if tt.size:
        I0, I1 = phi.cell_moments(lo[tt, cc], hi[tt, cc])
        h = hc[cc]
        np.add.at(W, (tt, cc + 1), I0 - I1 / h)
        np.add.at(W, (tt, cc), I1 / h)
    return W, const


def uniform_weights(phi: ProfileFunction, h: float, count: int):
    """Product-trapezoid weights for cells ``[m h, (m+1) h]``, ``m < count``.

    Returns ``(A, B)`` with ``A`` multiplying the node value at the cell end
    nearer the target and ``B`` the farther one.
    """
    m = np.arange(count, dtype=float)
    I0, I1 = phi.cell_moments(m * h, (m + 1) * h)
    return I0 - I1 / h, I1 / h


def _solve_level(phi: ProfileFunction, grid: Grid) -> np.ndarray:
    x = grid.nodes
    n = grid.n
    f = phi(x).astype(complex)
    if grid.is_uniform and not phi.singular:
        h = x[1]
        A, B = uniform_weights(phi, h, n + 1)
        c0a = np.concatenate([[0.0], A[:n]])
        c0b = np.concatenate([[0.0], B[:n]])
        return np.asarray(core.toeplitz_solve(f, A, B, c0a, c0b))
    W = np.zeros((n + 1, n + 1), dtype=complex)
    for i in range(1, n + 1):
        Wi, ci = conv_rows(phi, grid, i, x[i:i + 1])
        W[i, : i + 1] = Wi[0]
        f[i] += ci[0]
    if phi.singular:
        f[0] = 0.0
    y = np.asarray(core.tri_solve(W, f))
    if phi.singular:
        y[0] = np.inf
    return y


def growth_search(phi: ProfileFunction) -> float:
    """Smallest ``a`` in ``{1, 2, 4, ..., 1024}`` with ``||exp(-a x) phi||_1 < 1``."""
    for a in GROWTH_SEARCH:
        if phi.weighted_l1(a) < 1:
            return a
    raise InadmissibleProfileError(
        f"no a <= {GROWTH_SEARCH[-1]:g} with weighted L1 norm below 1")


def solve_resolvent_profile(phi: ProfileFunction, grid: Grid,
                            richardson: bool | None = None) -> ResolventProfile:
    """Solve ``psi = phi + phi * psi`` by forward substitution.

    The convolution is discretized by product integration: ``phi`` is
    integrated exactly (or by high-order Gauss rules) against the piecewise
    linear interpolant of ``psi``.  For profiles bounded at the origin the
    result is Richardson-extrapolated from the grid and its 2x refinement,
    which lifts the nodal error from second to fourth order.
    """
    a = growth_search(phi)
    if richardson is None:
        richardson = not phi.singular
    coarse = _solve_level(phi, grid)
    if not richardson:
        return ResolventProfile(GridFunction(grid, coarse), a, phi)
    fine_grid = refine(grid)
    fine = _solve_level(phi, fine_grid)
    ext = (4 * fine[::2] - coarse) / 3
    return ResolventProfile(GridFunction(grid, ext), a, phi,
                            levels=(GridFunction(grid, coarse), GridFunction(fine_grid, fine)))


def neumann_series_oracle(phi: ProfileFunction, N: int, grid: Grid) -> GridFunction:
    """Partial sum ``phi + phi*phi + ... + phi^{*N}`` on the grid.

    Independent of the triangular solver: each power is formed by an
    explicit trapezoid convolution with the sampled profile.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    p = GridFunction(grid, phi(grid.nodes))
    term = p
    total = p
    for _ in range(N - 1):
        term = convolve(p, term)
        total = total + term
    return total


def fixed_point_residual(res: ResolventProfile) -> float:
    """Sup-norm of ``psi - phi - phi * psi`` using the trapezoid convolution.

    Only meaningful for profiles bounded at the origin; the trapezoid rule
    cannot see an integrable singularity.
    """
    if res.phi.singular:
        raise ValueError("trapezoid residual is undefined for a profile singular at 0")
    grid = res.grid
    p = GridFunction(grid, res.phi(grid.nodes))
    r = res.psi - p - convolve(p, res.psi)
    v = np.abs(r.values)
    return float(np.max(v[np.isfinite(v)]))
