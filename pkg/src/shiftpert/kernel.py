"""Half-density functions, the functions q, p and xi, and perturbation kernels."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from ._backend import core
from .numerics import DomainError, Grid, GridFunction, centered_diff, integrate_samples
from .profiles import ProfileFunction
from .transforms import BoundaryDensity, bromwich_inverse
from .volterra import (ResolventProfile, conv_rows, refine, solve_resolvent_profile,
                       uniform_weights)

ZERO_TOL = 1e-12
_GX, _GW = np.polynomial.legendre.leggauss(8)


class PoleError(ValueError):
    """``M(z)`` vanishes (numerically) at the requested point."""


# ---------------------------------------------------------------------------
# half-density functions


@dataclass(frozen=True, eq=False)
class HalfDensity:
    """Holomorphic function ``M`` on the right half-plane.

    Attributes
    ----------
    evaluator : callable
        Vectorized ``z -> M(z)`` for ``Re z > 0`` (and on the axis where the
        boundary values exist).
    boundary : BoundaryDensity
        ``lam -> |M(i lam)|^2``.
    conj_symmetric : bool
        Whether ``conj(M(conj z)) == M(z)``.
    provenance : dict
        ``{"kind": "profile", ...}`` or ``{"kind": "closed", "name": ...}``.
    profile : ProfileFunction or None
        Generating profile for the ``1 - Laplace(phi)`` family.
    q_closed, r_closed : callable or None
        Closed forms of ``q`` (with ``(1+z) Lq = M``) and ``r``
        (with ``(1+z) M Lr = 1``) when known.
    """

    evaluator: Callable
    boundary: BoundaryDensity
    conj_symmetric: bool = True
    provenance: dict = field(default_factory=dict)
    profile: Optional[ProfileFunction] = None
    q_closed: Optional[Callable] = None
    r_closed: Optional[Callable] = None

    def __call__(self, z):
        return self.evaluator(np.asarray(z, dtype=complex))

    @property
    def name(self) -> str:
        p = self.provenance
        return p.get("name", p.get("kind", "?"))


def half_density_from_profile(phi: ProfileFunction) -> HalfDensity:
    """``M(z) = 1 - Laplace(phi)(z)``, normalized so that ``q(0) = 1``."""
    def M(z):
        return 1.0 - phi.laplace(z)

    def rho(lam):
        return np.abs(M(1j * np.asarray(lam, dtype=float))) ** 2

    return HalfDensity(M, BoundaryDensity(rho, "bounded"), phi.is_real,
                       {"kind": "profile", "profile": phi.to_dict()}, profile=phi)


def _mobius_q(a, b):
    """Inverse Laplace transform of ``(z+a)/((z+b)(z+1))``."""
    if abs(b - 1) < 1e-14:
        return lambda x: np.exp(-x) * (1 + (a - 1) * x)
    A = (a - b) / (1 - b)
    B = (a - 1) / (b - 1)
    return lambda x: A * np.exp(-b * x) + B * np.exp(-x)


def closed_form_density(name: str, **params) -> HalfDensity:
    """Closed-form half-densities.

    ``constant(c)``, ``mobius(a, b)`` for ``(z+a)/(z+b)``,
    ``shifted-power(alpha)`` for ``(1+z)^alpha``, ``log-power(alpha, a)``
    for ``log(a+z)^alpha`` and ``delayed(r, a)`` for ``1 - r exp(-a z)``.
    """
    prov = {"kind": "closed", "name": name, **{k: _jsonable(v) for k, v in params.items()}}
    if name == "constant":
        c = complex(params.get("c", 1.0))
        return HalfDensity(lambda z: c + 0 * z,
                           BoundaryDensity(lambda l: abs(c) ** 2 + 0 * np.asarray(l, float)),
                           c.imag == 0, prov, profile=ProfileFunction.zero() if c == 1 else None,
                           q_closed=lambda x: c * np.exp(-x),
                           r_closed=lambda x: np.exp(-x) / c)
    if name == "mobius":
        a, b = float(params["a"]), float(params["b"])
        if not b > 0:
            raise DomainError("mobius density needs b > 0")
        M = lambda z: (z + a) / (z + b)
        rho = lambda l: (np.asarray(l, float) ** 2 + a * a) / (np.asarray(l, float) ** 2 + b * b)
        r_closed = _mobius_q(b, a) if a > 0 else None
        if a == 0:
            # (z+b)/((z+1) z) = b/z + (1-b)/(z+1)
            r_closed = lambda x: b + (1 - b) * np.exp(-x)
        return HalfDensity(M, BoundaryDensity(rho), True, prov,
                           profile=ProfileFunction.exponential(b - a, b),
                           q_closed=_mobius_q(a, b), r_closed=r_closed)
    if name == "shifted-power":
        al = float(params["alpha"])
        if not -0.5 < al < 0.5:
            raise DomainError("shifted-power density needs |alpha| < 1/2")
        M = lambda z: (1 + z) ** al
        rho = lambda l: (1 + np.asarray(l, float) ** 2) ** al
        bd = BoundaryDensity(rho, "power", 2 * al) if al > 0 else BoundaryDensity(rho)
        with np.errstate(divide="ignore"):
            q = lambda x: np.where(x > 0, np.power(np.maximum(x, 1e-300), -al), 0 if al < 0 else np.inf) * np.exp(-x) / special.gamma(1 - al)
            r = lambda x: np.where(x > 0, np.power(np.maximum(x, 1e-300), al), 0 if al > 0 else np.inf) * np.exp(-x) / special.gamma(1 + al)
        return HalfDensity(M, bd, True, prov, q_closed=q, r_closed=r)
    if name == "log-power":
        al, a = float(params["alpha"]), float(params.get("a", 1.0))
        if not (al > 0 and a >= 1):
            raise DomainError("log-power density needs alpha > 0, a >= 1")
        M = lambda z: np.log(a + z) ** al
        rho = lambda l: np.abs(np.log(a + 1j * np.asarray(l, float))) ** (2 * al)
        return HalfDensity(M, BoundaryDensity(rho, "log"), True, prov)
    if name == "delayed":
        r, a = complex(params["r"]), float(params["a"])
        M = lambda z: 1 - r * np.exp(-a * z)
        rho = lambda l: np.abs(1 - r * np.exp(-1j * a * np.asarray(l, float))) ** 2
        # exp(-i a lam) extends to the bounded function exp(-a z)
        ext = lambda z: 1 + abs(r) ** 2 - 2 * np.real(r * np.exp(-a * np.asarray(z, complex)))
        q = lambda x: np.exp(-x) - r * np.where(x >= a, np.exp(-(x - a)), 0.0)
        return HalfDensity(M, BoundaryDensity(rho, extension=ext), r.imag == 0, prov, q_closed=q)
    raise DomainError(f"unknown closed-form density {name!r}")


def _jsonable(v):
    if isinstance(v, complex):
        return v.real if v.imag == 0 else [v.real, v.imag]
    return v


# ---------------------------------------------------------------------------
# q, p and xi


@dataclass(frozen=True, eq=False)
class QFunction:
    """The function ``q`` with ``(1+z) Laplace(q)(z) = M(z)``."""

    q: GridFunction
    q0: complex
    evaluator: Optional[Callable] = None

    @property
    def grid(self) -> Grid:
        return self.q.grid


def _profile_cell_integral(phi: ProfileFunction, lo, hi, weight):
    """``int_lo^hi phi(s) weight(s) ds`` for a smooth weight, cell by cell.

    Near-singular cells use the exact moments of ``phi`` against the linear
    interpolant of the weight; other cells use 8-point Gauss rules on each
    piece between breakpoints.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    cuts = [-np.inf, *sorted(phi.breakpoints), np.inf]
    total = np.zeros(lo.shape, dtype=complex)
    for c0, c1 in zip(cuts[:-1], cuts[1:]):
        a = np.clip(lo, c0, c1)
        b = np.clip(hi, c0, c1)
        h = b - a
        live = h > 0
        if not np.any(live):
            continue
        a, b, h = a[live], b[live], h[live]
        near = (a < h) & phi.singular
        val = np.zeros(a.shape, dtype=complex)
        if np.any(near):
            I0, I1 = phi.cell_moments(a[near], b[near])
            wa, wb = weight(a[near]), weight(b[near])
            val[near] = wa * I0 + (wb - wa) * I1 / h[near]
        far = ~near
        if np.any(far):
            half = 0.5 * h[far]
            s = (a[far] + half)[:, None] + half[:, None] * _GX
            val[far] = (phi(s) * weight(s) * _GW).sum(1) * half
        total[live] += val
    return total


def q_from_profile(phi: ProfileFunction, grid: Grid) -> QFunction:
    """``q(x) = exp(-x) - int_0^x phi(s) exp(s - x) ds`` with ``q(0) = 1``.

    Evaluated by the stable recursion
    ``q(x_{i+1}) = exp(-h) q(x_i) - int_{x_i}^{x_{i+1}} phi(s) exp(s - x_{i+1}) ds``.
    """
    x = grid.nodes
    lo, hi = x[:-1], x[1:]
    cell = np.array([_profile_cell_integral(phi, np.array([a]), np.array([b]),
                                            lambda s, b=b: np.exp(s - b))[0]
                     for a, b in zip(lo, hi)]) if phi.form == "table" else \
        _cell_integrals_shifted(phi, lo, hi)
    decay = np.exp(-(hi - lo))
    q = np.empty(grid.n + 1, dtype=complex)
    q[0] = 1.0
    for i in range(grid.n):
        q[i + 1] = decay[i] * q[i] - cell[i]

    def evaluator(s):
        # continue the recursion from the node below each point
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        i = np.clip(np.searchsorted(x, flat, side="right") - 1, 0, grid.n)
        base = x[i]
        part = _cell_integrals_shifted(phi, base, np.maximum(flat, base))
        out = np.exp(-(flat - base)) * q[i] - part
        return out.reshape(s.shape)

    return QFunction(GridFunction(grid, q), 1.0, evaluator if phi.form != "table" else None)


def _cell_integrals_shifted(phi, lo, hi):
    # int_lo^hi phi(s) exp(s - hi) ds, vectorized over cells
    out = np.zeros(lo.shape, dtype=complex)
    cuts = [-np.inf, *sorted(phi.breakpoints), np.inf]
    for c0, c1 in zip(cuts[:-1], cuts[1:]):
        a = np.clip(lo, c0, c1)
        b = np.clip(hi, c0, c1)
        h = b - a
        live = h > 0
        if not np.any(live):
            continue
        idx = np.nonzero(live)[0]
        a, b, h, top = a[live], b[live], h[live], hi[live]
        near = (a < h) & phi.singular
        val = np.zeros(a.shape, dtype=complex)
        if np.any(near):
            I0, I1 = phi.cell_moments(a[near], b[near])
            wa, wb = np.exp(a[near] - top[near]), np.exp(b[near] - top[near])
            val[near] = wa * I0 + (wb - wa) * I1 / h[near]
        far = ~near
        if np.any(far):
            half = 0.5 * h[far]
            s = (a[far] + half)[:, None] + half[:, None] * _GX
            val[far] = (phi(s) * np.exp(s - top[far][:, None]) * _GW).sum(1) * half
        out[idx] += val
    return out


def q_from_density(M: HalfDensity, grid: Grid) -> QFunction:
    """``q`` for any half-density: closed form, profile formula, or Bromwich inversion."""
    if M.q_closed is not None:
        vals = M.q_closed(grid.nodes)
        return QFunction(GridFunction(grid, vals), complex(vals[0]), M.q_closed)
    if M.profile is not None:
        return q_from_profile(M.profile, grid)
    F = lambda z: M(z) / (1 + z)
    vals = np.array([bromwich_inverse(F, t, 1.0) if t > 0 else np.nan for t in grid.nodes])
    vals[0] = complex(1e8 * F(1e8))
    return QFunction(GridFunction(grid, vals), vals[0])


def _exp_linear_cells(q: GridFunction, z: complex):
    """``int_{x_i}^{x_{i+1}} exp(-z (s - x_i)) q(s) ds`` with ``q`` linear on cells."""
    x = q.nodes
    h = np.diff(x)
    a = z * h
    qa, qb = q.values[:-1], q.values[1:]
    small = np.abs(a) < 1e-4
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        e = np.exp(-a)
        m0 = np.where(small, h * (1 - a / 2 + a * a / 6), (1 - e) / z)
        # int_0^h (u/h) exp(-z u) du
        m1 = np.where(small, h * (0.5 - a / 3 + a * a / 8),
                      (1 - e * (1 + a)) / (z * z * h))
    return qa * (m0 - m1) + qb * m1


def tail_laplace(q: GridFunction, z: complex, evaluator=None) -> np.ndarray:
    """``R(x_i) = int_0^inf q(x_i + s) exp(-z s) ds`` by backward recursion.

    Uses Gauss rules on each cell when a closed-form ``q`` is supplied,
    product integration of the linear interpolant otherwise.  The part of the
    integral beyond ``x_max`` is dropped.
    """
    z = complex(z)
    x = q.nodes
    if evaluator is not None:
        lo, hi = x[:-1], x[1:]
        half = 0.5 * (hi - lo)
        s = (lo + half)[:, None] + half[:, None] * _GX
        with np.errstate(all="ignore"):
            vals = evaluator(s) * np.exp(-z * (s - lo[:, None]))
        cells = (vals * _GW).sum(1) * half
    else:
        cells = _exp_linear_cells(q, z)
    decay = np.exp(-z * np.diff(x))
    R = np.zeros(x.shape[0], dtype=complex)
    for i in range(x.shape[0] - 2, -1, -1):
        R[i] = decay[i] * R[i + 1] + cells[i]
    return R


def p_from_q(q: QFunction, grid: Optional[Grid] = None) -> GridFunction:
    """``p(x) = Lq(1) exp(-x) + int_0^inf exp(-t) q(x + t) dt``."""
    g = q.q
    R = tail_laplace(g, 1.0, q.evaluator)
    return GridFunction(g.grid, R[0] * np.exp(-g.nodes) + R)


def q_from_p(p: GridFunction) -> GridFunction:
    """Round trip ``q = p - p' - p(0) exp(-x)`` with finite differences."""
    dp = centered_diff(p)
    return GridFunction(p.grid, p.values - dp.values - p.values[0] * np.exp(-p.nodes))


def _pole_check(M: HalfDensity, z: complex):
    z = complex(z)
    if not z.real > 0:
        raise DomainError(f"need Re z > 0, got {z}")
    Mz = complex(M(z))
    ys = z.imag + np.array([-4.0, -1.0, 1.0, 4.0]) * (1 + abs(z))
    scale = max(abs(Mz), float(np.max(np.abs(M(z.real + 1j * ys)))))
    if abs(Mz) <= ZERO_TOL * scale:
        raise PoleError(f"|M(z)| = {abs(Mz):.3g} is numerically zero at z = {z}")
    return Mz


def xi_laplace(M: HalfDensity, z: complex, w):
    """Laplace transform of ``xi_{M,z}`` at ``w``: ``(M(z)-M(w)) / (M(z)(z-w))``."""
    Mz = complex(M(z))
    w = np.asarray(w, dtype=complex)
    return (Mz - M(w)) / (Mz * (z - w))


@dataclass(frozen=True, eq=False)
class XiVector:
    values: GridFunction
    z: complex
    laplace_check: float

    @property
    def grid(self):
        return self.values.grid


def xi_vector(M: HalfDensity, z: complex, grid: Grid, q: Optional[QFunction] = None) -> XiVector:
    """Samples of ``xi(y) = [q(y) - (1+z) int_0^inf q(y+s) exp(-s z) ds] / M(z)``.

    The Laplace-domain characterization is checked at ``w = Re z + 1`` and
    ``w = 2 Re z + 1 + i``; the largest discrepancy is stored.
    """
    z = complex(z)
    Mz = _pole_check(M, z)
    if q is None:
        q = q_from_density(M, grid)
    R = tail_laplace(q.q, z, q.evaluator)
    xi = GridFunction(grid, (q.q.values - (1 + z) * R) / Mz)
    err = 0.0
    for w in (z.real + 1.0, 2 * z.real + 1.0 + 1j):
        num = complex(integrate_samples(xi.values * np.exp(-w * grid.nodes), grid))
        ref = complex(xi_laplace(M, z, w))
        err = max(err, abs(num - ref))
    return XiVector(xi, z, err)


def eta_vector(phi: ProfileFunction, z: complex, grid: Grid) -> GridFunction:
    """``eta(x) = int_0^inf exp(-z t) phi(t + x) dt`` by backward recursion."""
    z = complex(z)
    x = grid.nodes
    lo, hi = x[:-1], x[1:]
    cells = np.array([_profile_cell_integral(phi, np.array([a]), np.array([b]),
                                             lambda s, a=a: np.exp(-z * (s - a)))[0]
                      for a, b in zip(lo, hi)])
    # tail beyond x_max
    tail = complex(_profile_cell_integral(phi, np.array([x[-1]]), np.array([x[-1] + 60.0]),
                                          lambda s: np.exp(-z * (s - x[-1])))[0])
    decay = np.exp(-z * (hi - lo))
    out = np.zeros(x.shape[0], dtype=complex)
    out[-1] = tail
    for i in range(grid.n - 1, -1, -1):
        out[i] = decay[i] * out[i + 1] + cells[i]
    return GridFunction(grid, out)


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True, eq=False)
class PerturbationKernel:
    """Kernel ``k(x, y)`` of ``K_t`` sampled on ``grid x grid``.

    ``values[i, j] = k(x_i, y_j)``; only the first ``values.shape[0]`` rows
    may be present when a kernel was built for small ``x`` only.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)
    closed_form: Optional[Callable] = None
    growth: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes[: self.nrows]

    def row(self, x: float) -> np.ndarray:
        """``k(x, .)`` on the y-nodes, linear in ``x`` between rows."""
        xs = self.x
        if x < 0 or x > xs[-1] + 1e-12:
            raise DomainError(f"row {x} outside the kernel's x-range [0, {xs[-1]}]")
        i = int(np.searchsorted(xs, x))
        if i < xs.shape[0] and abs(xs[i] - x) <= 1e-12 * max(1.0, x):
            return self.values[i]
        i = min(max(i, 1), xs.shape[0] - 1)
        lam = (x - xs[i - 1]) / (xs[i] - xs[i - 1])
        return (1 - lam) * self.values[i - 1] + lam * self.values[i]

    def __call__(self, x, y):
        """Bilinear interpolation (closed form when available)."""
        if self.closed_form is not None:
            return self.closed_form(np.asarray(x, float), np.asarray(y, float))
        x = np.atleast_1d(np.asarray(x, float))
        y = np.atleast_1d(np.asarray(y, float))
        out = np.empty(np.broadcast(x, y).shape, dtype=complex)
        xb, yb = np.broadcast_arrays(x, y)
        for k, (a, b) in enumerate(zip(xb.ravel(), yb.ravel())):
            r = self.row(a)
            out.flat[k] = np.interp(b, self.grid.nodes, r.real) + 1j * np.interp(b, self.grid.nodes, r.imag)
        return out

    def sup_norm(self) -> float:
        v = np.abs(self.values)
        return float(np.max(v[np.isfinite(v)]))

    def to_csv(self, path):
        """Write the matrix with a header row of y-nodes and a first column of x-nodes."""
        y = self.grid.nodes
        vals = self.values
        real = bool(np.all(vals.imag == 0))
        with open(path, "w") as fh:
            fh.write("x\\y," + ",".join(f"{v:.17g}" for v in y) + "\n")
            for xi, row in zip(self.x, vals):
                cells = (f"{v.real:.17g}" if real else f"{v.real:.17g}{v.imag:+.17g}j" for v in row)
                fh.write(f"{xi:.17g}," + ",".join(cells) + "\n")

    def metadata(self) -> dict:
        return {"grid": self.grid.to_dict(), "rows": self.nrows, "growth": self.growth,
                **self.meta}

    def write(self, csv_path, json_path):
        self.to_csv(csv_path)
        with open(json_path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)


def _kernel_level(phi: ProfileFunction, psi: np.ndarray, grid: Grid, rows: int) -> np.ndarray:
    x = grid.nodes
    n = grid.n
    if grid.is_uniform and not phi.singular:
        h = x[1]
        width = rows + n + 1
        m = np.arange(width + 1, dtype=float)
        phi_ext = phi(m * h)
        A, B = uniform_weights(phi, h, width + 1)
        first = psi[1] * A + psi[0] * B
        return np.asarray(core.hankel_fill(phi_ext, A, B, psi, first, rows, n + 1))
    out = np.empty((rows, n + 1), dtype=complex)
    psi_f = np.where(np.isfinite(psi), psi, 0.0)
    for i in range(rows):
        u = x[i] + x
        W, const = conv_rows(phi, grid, i, u)
        with np.errstate(invalid="ignore"):
            out[i] = phi(u) + W @ psi_f[: i + 1] + const
    return out


def hs_bound(phi: ProfileFunction, res: ResolventProfile) -> float:
    """Upper bound ``(1 + ||e_a psi||_1)^2 int |phi|^2 min(1, x)`` for the weighted HS norm."""
    a = res.growth
    psi = res.levels[0] if res.levels else res.psi
    l1 = float(np.real(integrate_samples(np.abs(psi.values) * np.exp(-a * psi.nodes), psi.grid)))
    return (1 + l1) ** 2 * phi.admissibility_integral()


def build_kernel(phi: ProfileFunction, res: Optional[ResolventProfile], grid: Grid,
                 x_cut: Optional[float] = None) -> PerturbationKernel:
    """``k(x, y) = phi(x + y) + int_0^x phi(x + y - s) psi(s) ds`` on ``grid x grid``.

    ``x_cut`` limits the rows to ``x <= x_cut``.  When the resolvent profile
    carries two refinement levels the kernel is Richardson-extrapolated from
    the matching two levels.
    """
    if res is None:
        res = solve_resolvent_profile(phi, grid)
    if res.grid != grid:
        raise ValueError("resolvent profile lives on a different grid")
    rows = grid.n + 1 if x_cut is None else int(np.searchsorted(grid.nodes, x_cut, side="right"))
    rows = max(rows, 1)
    if res.levels:
        coarse = _kernel_level(phi, res.levels[0].values, grid, rows)
        fg = res.levels[1].grid
        fine = _kernel_level(phi, res.levels[1].values, fg, 2 * rows - 1)
        vals = (4 * fine[::2, ::2] - coarse) / 3
    else:
        vals = _kernel_level(phi, res.psi.values, grid, rows)
    meta = {"provenance": {"kind": "profile", "profile": phi.to_dict()},
            "richardson": bool(res.levels), "hs_bound": hs_bound(phi, res),
            "growth_psi": res.growth}
    closed = None
    if phi.form == "exponential":
        c, d = phi.params
        closed = lambda x, y: c * np.exp((c - d) * x - d * y)
    elif phi.form == "zero":
        closed = lambda x, y: np.zeros(np.broadcast(x, y).shape, dtype=complex)
    return PerturbationKernel(grid, vals, closed, float(res.growth), meta)


def exponential_kernel(c: complex, d: complex, grid: Grid) -> PerturbationKernel:
    """Closed-form kernel ``c exp((c-d) x - d y)`` of the profile ``c exp(-d x)``."""
    x = grid.nodes
    f = lambda X, Y: c * np.exp((c - d) * X - d * Y)
    return PerturbationKernel(grid, f(x[:, None], x[None, :]), f, max(0.0, (c - d).real),
                              {"provenance": {"kind": "closed", "name": "exponential",
                                              "c": _jsonable(complex(c)), "d": _jsonable(complex(d))}})


def _finite_diff(v, x):
    return np.gradient(v, x, edge_order=2)


def kernel_from_q_r(q: GridFunction, r: GridFunction, variant: int = 2) -> PerturbationKernel:
    """Kernel of a general half-density from ``q`` and ``r`` on a uniform grid.

    ``variant=2``: ``-r(0) g(x+y) - int_0^x (r + r')(s) g(x+y-s) ds``;
    ``variant=1``: ``-r(x) g(y) - int_0^x r(s) (g + g')(x+y-s) ds``;
    where ``g = q + q'``.  Derivatives are second-order finite differences.
    The result lives on the first half of the grid, so that ``x + y`` stays
    inside the sampled range.
    """
    grid = q.grid
    if r.grid != grid or not grid.is_uniform:
        raise ValueError("q and r must share one uniform grid")
    x = grid.nodes
    h = x[1]
    half = grid.n // 2
    g = q.values + _finite_diff(q.values, x)
    sub = Grid(x[half], half, "uniform")
    out = np.zeros((half + 1, half + 1), dtype=complex)
    if variant == 2:
        rho = r.values + _finite_diff(r.values, x)
        for i in range(half + 1):
            idx = i + np.arange(half + 1)
            conv = np.zeros(half + 1, dtype=complex)
            if i > 0:
                wt = np.full(i + 1, h)
                wt[0] = wt[-1] = h / 2
                s = np.arange(i + 1)
                conv = (rho[s] * wt) @ g[idx[None, :] - s[:, None]]
            out[i] = -r.values[0] * g[idx] - conv
    elif variant == 1:
        gg = g + _finite_diff(g, x)
        for i in range(half + 1):
            idx = i + np.arange(half + 1)
            conv = np.zeros(half + 1, dtype=complex)
            if i > 0:
                wt = np.full(i + 1, h)
                wt[0] = wt[-1] = h / 2
                s = np.arange(i + 1)
                conv = (r.values[s] * wt) @ gg[idx[None, :] - s[:, None]]
            out[i] = -r.values[i] * g[: half + 1] - conv
    else:
        raise ValueError("variant must be 1 or 2")
    return PerturbationKernel(sub, out, None, 0.0, {"provenance": {"kind": "q-r", "variant": variant}})


def alpha_kernel(alpha: float, grid: Grid) -> PerturbationKernel:
    """Kernel of ``M(z) = (1+z)^alpha``:
    ``sin(alpha pi)/pi * x^alpha y^-alpha exp(-(x+y)) / (x+y)``.

    Non-finite samples on the axes are stored as ``inf``.  The Schur-test
    bound ``|tan(alpha pi)|`` on the operator norm is recorded in ``meta``.
    """
    if not -0.5 < alpha < 0.5:
        raise DomainError("alpha kernel needs |alpha| < 1/2")
    f = alpha_kernel_closed(alpha)
    x = grid.nodes
    vals = f(x[:, None], x[None, :]).astype(complex)
    meta = {"provenance": {"kind": "closed", "name": "shifted-power", "alpha": alpha},
            "schur_bound": abs(np.tan(alpha * np.pi))}
    if alpha > 0:
        # rows behave like y^-alpha at y = 0 and tend to a unit point mass at
        # y = 0 as x -> 0, with a defect of order x^alpha
        meta.update(y_singularity=alpha, row_limit="delta", row_limit_exponent=alpha)
    return PerturbationKernel(grid, vals, f, 0.0, meta)


def alpha_kernel_closed(alpha: float):
    c = np.sin(alpha * np.pi) / np.pi

    def f(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if alpha == 0:
            return np.zeros(x.shape)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = c * np.power(x, alpha) * np.power(y, -alpha) * np.exp(-(x + y)) / (x + y)
        return np.where(np.isfinite(v), v, np.inf)
    return f


def schur_norm_estimate(k: PerturbationKernel) -> float:
    """Largest singular value of the symmetrically weighted kernel matrix."""
    w = np.sqrt(k.grid.weights)
    v = np.where(np.isfinite(k.values), k.values, 0.0)
    A = w[: k.nrows, None] * v * w[None, :]
    return float(np.linalg.norm(A, 2))


def delayed_kernel_apply(r: complex, a: float, t: float, f: GridFunction) -> GridFunction:
    """``K_t f`` for ``M(z) = 1 - r exp(-a z)``.

    ``K_t f(x) = r^n f(n a - t + x)`` with ``(n-1) a < t - x <= n a``, and
    zero for ``x >= t``.
    """
    if not a > 0:
        raise DomainError("delay must be positive")
    if t < 0:
        raise DomainError("t must be >= 0")
    x = f.nodes
    d = t - x
    out = np.zeros(x.shape[0], dtype=complex)
    live = d > 0
    n = np.ceil(d[live] / a - 1e-12)
    out[live] = complex(r) ** n * f(n * a - t + x[live])
    return GridFunction(f.grid, out)


# ---------------------------------------------------------------------------
# rank-one update


def _inverse_on_grid(F: Callable, grid: Grid, b: float) -> np.ndarray:
    x = grid.nodes
    vals = np.array([bromwich_inverse(F, t, b) if t > 0 else 0j for t in x])
    # right limit at the origin from the initial value theorem
    big = 1e9
    vals[0] = complex(big * F(big + 0j))
    return vals


def mobius_rank_one_update(k: PerturbationKernel, M: HalfDensity, beta: complex,
                           gamma: complex, b: float = 1.0):
    """Kernel of ``M1(z) = (z - beta) M(z) / (z + gamma)``.

    ``k1(x, y) = k(x, y) + (beta + gamma) r_beta(x) q_gamma(y)`` with
    ``L q_gamma = M/(z + gamma)`` and ``L r_beta = 1/((z - beta) M)``, both
    obtained by Bromwich inversion on the line ``Re z = max(b, Re beta + 1)``.
    Returns ``(k1, M1, r_beta, q_gamma)``.
    """
    beta, gamma = complex(beta), complex(gamma)
    if beta.real < 0 or not gamma.real > 0:
        raise DomainError("need Re beta >= 0 and Re gamma > 0")
    grid = k.grid
    line = max(b, beta.real + 1.0)
    qg = _inverse_on_grid(lambda z: M(z) / (z + gamma), grid, line)
    rb = _inverse_on_grid(lambda z: 1.0 / ((z - beta) * M(z)), grid, line)
    rows = k.nrows
    vals = k.values + (beta + gamma) * rb[:rows, None] * qg[None, :]
    M1 = HalfDensity(lambda z: (z - beta) * M(z) / (z + gamma),
                     BoundaryDensity(lambda l: np.abs((1j * np.asarray(l, float) - beta) /
                                                      (1j * np.asarray(l, float) + gamma)) ** 2 * M.boundary(l),
                                     M.boundary.growth, M.boundary.exponent),
                     M.conj_symmetric and beta.imag == 0 and gamma.imag == 0,
                     {"kind": "closed", "name": "mobius-update", "base": M.provenance,
                      "beta": _jsonable(beta), "gamma": _jsonable(gamma)})
    k1 = PerturbationKernel(grid, vals, None, k.growth, {"provenance": M1.provenance})
    return k1, M1, GridFunction(grid, rb), GridFunction(grid, qg)


def rank_one_minors(D: np.ndarray, count: int = 100, seed: int = 0) -> np.ndarray:
    """``|D[i1,j1] D[i2,j2] - D[i1,j2] D[i2,j1]|`` at random node quadruples."""
    rng = np.random.default_rng(seed)
    n0, n1 = D.shape
    i = rng.integers(0, n0, size=(count, 2))
    j = rng.integers(0, n1, size=(count, 2))
    return np.abs(D[i[:, 0], j[:, 0]] * D[i[:, 1], j[:, 1]] - D[i[:, 0], j[:, 1]] * D[i[:, 1], j[:, 0]])


def cocycle_residuals(k: PerturbationKernel, triples, exact: bool = False) -> np.ndarray:
    """Residuals of ``k(x+t, y) = k(x, y+t) + int_0^t k(x, s) k(t-s, y) ds``.

    With ``exact=True`` and a closed form, the convolution term is computed
    by adaptive quadrature; otherwise by the trapezoid rule on the grid
    nodes in ``[0, t]`` with bilinear kernel interpolation.
    """

    out = []
    for (x, y, t) in triples:
        lhs = complex(np.asarray(k(x + t, y)).ravel()[0])
        rhs = complex(np.asarray(k(x, y + t)).ravel()[0])
        if exact and k.closed_form is not None:
            f = k.closed_form
            parts = []
            for comp in (np.real, np.imag):
                v, _ = integrate.quad(lambda s: float(comp(f(x, s) * f(t - s, y))), 0, t, limit=200)
                parts.append(v)
            conv = complex(*parts)
        else:
            nodes = k.grid.nodes
            s = np.concatenate([nodes[nodes < t], [t]])
            vals = np.array([complex(np.asarray(k(x, si)).ravel()[0] * np.asarray(k(t - si, y)).ravel()[0]) for si in s])
            conv = complex(integrate.trapezoid(vals, s))
        out.append(abs(lhs - rhs - conv))
    return np.array(out)
