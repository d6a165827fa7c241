"""Membership tests for half-densities: resolvent-vector norms, the
Hilbert-Schmidt criterion, factorization components, boundary-weight
conditions and small-t laws of the Hilbert-Schmidt norm."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, stats

from .kernel import HalfDensity, PoleError, _pole_check, xi_laplace
from .numerics import DomainError, InvalidParameterError
from .profiles import ProfileFunction
from .transforms import W_CAP, BoundaryDensity, plancherel_norm, poisson_integral

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


class UnsupportedCaseError(ValueError):
    """The profile form is outside the classified small-t cases."""


@dataclass
class Verdict:
    status: str
    evidence: dict

    def to_dict(self):
        return {"status": self.status, "evidence": _clean(self.evidence)}


@dataclass
class ClassificationReport:
    """Per-x hd2 integrals, verdicts with evidence, and an optional asymptotic fit."""

    hd2_samples: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    fit: Optional[dict] = None

    def to_dict(self):
        return {"hd2_samples": _clean(self.hd2_samples),
                "verdicts": {k: v.to_dict() for k, v in sorted(self.verdicts.items())},
                "asymptotic_fit": _clean(self.fit)}

    def to_json(self, path=None):
        s = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s + "\n")
        return s

    def summary_table(self) -> str:
        rows = [f"{'test':<28}{'verdict':<14}evidence"]
        for k, v in sorted(self.verdicts.items()):
            ev = ", ".join(f"{a}={_fmt(b)}" for a, b in sorted(v.evidence.items())
                           if not isinstance(b, (list, dict)))
            rows.append(f"{k:<28}{v.status:<14}{ev}")
        return "\n".join(rows)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _clean(v):
    """JSON-safe copy: complex as [re, im], numpy scalars as Python, inf/nan as strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (complex, np.complexfloating)):
        return [_clean(float(v.real)), _clean(float(v.imag))]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# ---------------------------------------------------------------------------
# norms of the resolvent vector


def _poisson_ratio(M: HalfDensity, z: complex, tol: float = 1e-11):
    Mz = _pole_check(M, z)
    P = poisson_integral(M.boundary, z, tol=tol)
    return P.value / abs(Mz) ** 2 - 1.0, P


def xi_norm_poisson(M: HalfDensity, z: complex) -> float:
    """``||xi_{M,z}||^2 = (P[|M(i.)|^2](z) / |M(z)|^2 - 1) / (2 Re z)``.

    The bracket is nonnegative; rounding below zero is clipped.
    """
    z = complex(z)
    r, _ = _poisson_ratio(M, z)
    return max(r, 0.0) / (2 * z.real)


def xi_norm_plancherel(M: HalfDensity, z: complex, tol: float = 1e-12) -> float:
    """``(1/2pi) int |L xi(i lam)|^2 d lam`` with ``L xi(w) = (M(z)-M(w))/(M(z)(z-w))``.

    Returns ``nan`` when the boundary tail does not resolve.
    """
    z = complex(z)
    _pole_check(M, z)
    res = plancherel_norm(lambda w: complex(xi_laplace(M, z, w)), tol=tol,
                          scale=max(1.0, abs(z)), points=(z.imag,))
    return res.value if res.converged else float("nan")


# ---------------------------------------------------------------------------
# batched Poisson integrals along a vertical line

_TS_H = 1.0 / 32
_TS_T = np.arange(-3.5, 3.5 + _TS_H / 2, _TS_H)
_TS_S = 0.5 * np.pi * np.sinh(_TS_T)
_TS_W = _TS_H * 0.5 * np.pi * np.cosh(_TS_T) / np.cosh(_TS_S) ** 2
# fractions of a piece to the left and right of each node, without cancellation
_TS_L = 1.0 / (1.0 + np.exp(-2 * _TS_S))
_TS_R = 1.0 / (1.0 + np.exp(2 * _TS_S))


def poisson_line(rho: BoundaryDensity, x: float, ys) -> np.ndarray:
    """``P[rho](x + i y)`` for an array of ``y`` by tanh-sinh quadrature.

    Uses ``lam = y + x tan(theta)`` on ``(-pi/2, pi/2)``, split at the
    images of ``0`` and of the density's breakpoints.  Integrable growth at
    infinity becomes an endpoint singularity in ``theta``, which the
    double-exponential rule absorbs.
    """
    ys = np.atleast_1d(np.asarray(ys, float))
    if rho.extension is not None:
        return np.asarray(rho.extension(x + 1j * ys), float)
    cuts = np.array(sorted({0.0, *map(float, rho.breakpoints)}))
    th = np.arctan((cuts[None, :] - ys[:, None]) / x)
    edges = np.concatenate([np.full((ys.size, 1), -np.pi / 2), th,
                            np.full((ys.size, 1), np.pi / 2)], axis=1)
    total = np.zeros(ys.size)
    npieces = edges.shape[1] - 1
    for k in range(npieces):
        a, b = edges[:, k:k + 1], edges[:, k + 1:k + 2]
        L = b - a
        with np.errstate(divide="ignore"):
            tan = np.tan(a + L * _TS_L)
            # measure from the infinite ends to keep the far tail resolved
            if k == 0:
                tan = np.where(_TS_T < 0, -1.0 / np.tan(L * _TS_L), tan)
            if k == npieces - 1:
                tan = np.where(_TS_T > 0, 1.0 / np.tan(L * _TS_R), tan)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            lam = ys[:, None] + x * tan
            vals = np.real(rho(lam))
        vals = np.where(np.isfinite(vals), vals, 0.0)
        total += np.sum(vals * _TS_W * L * 0.5, axis=1)
    return total / np.pi


def xi_norm_line(M: HalfDensity, x: float, ys) -> np.ndarray:
    """``||xi_{M, x+iy}||^2`` for an array of ``y`` (batched Poisson form)."""
    ys = np.atleast_1d(np.asarray(ys, float))
    Mz = np.abs(M(x + 1j * ys)) ** 2
    if np.any(Mz == 0):
        raise PoleError(f"M vanishes on the line Re z = {x}")
    r = poisson_line(M.boundary, x, ys) / Mz - 1.0
    return np.maximum(r, 0.0) / (2 * x)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _panel(g, a, b):
    y = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
    return 0.5 * (b - a) * float(np.dot(_GL_W, g(y)))


def _windowed(g: Callable, y0: float, symmetric: bool, tol: float = 1e-3, cap: float = W_CAP,
              base: float = 0.25):
    """``int g(y) dy`` over the real line by window doubling.

    ``g`` is vectorized.  Dyadic panels ``[base 2^k, base 2^(k+1)]`` are
    added until the window reaches ``y0``, then the window doubles until the
    tail estimate ``W g(W) / (p - 1)`` falls below ``tol`` times the partial
    value, with ``p`` the decay exponent of ``g`` across the last panel
    (``p <= 1`` means a divergent tail).  Returns ``(value, tail, W, history)``.
    """
    sides = (1.0,) if symmetric else (1.0, -1.0)
    fac = 2.0 if symmetric else 1.0

    def add(a, b):
        return fac * sum(_panel(lambda y: g(s * y), a, b) for s in sides)

    W = base
    part = add(0.0, W)
    while W < y0:
        part += add(W, 2 * W)
        W *= 2
    history = []
    while True:
        tail = 0.0
        for s in sides:
            a, b = np.abs(g(np.array([s * W / 2, s * W])))
            if b == 0:
                continue
            p = math.log2(a / b) if a > 0 else float("inf")
            tail += float("inf") if p <= 1.02 else W * b / (p - 1)
        tail *= fac
        history.append((W, part, tail))
        if tail <= tol * abs(part) or W >= cap:
            return part, tail, W, history
        part += add(W, 2 * W)
        W *= 2


def _doubling_fail(history) -> bool:
    """Partial value at least doubling under two consecutive window doublings."""
    if len(history) < 3:
        return False
    v = [h[1] for h in history[-3:]]
    return v[0] > 0 and v[1] >= 2 * v[0] and v[2] >= 2 * v[1]


def _log_growth(history) -> bool:
    """Partial value growing by a steady positive amount per doubling."""
    if len(history) < 4:
        return False
    d = np.diff([h[1] for h in history[-4:]])
    return bool(np.all(d > 0) and d.min() > 0.5 * d.max())


def hd2_criterion(M: HalfDensity, xs: Sequence[float], scaled_window: float = 64.0,
                  tol: float = 1e-3, cap: float = 2.0 ** 16) -> ClassificationReport:
    """Windowed ``int ||xi_{M,x+iy}||^2 dy`` for each ``x`` and the normalized form.

    For each ``x`` the report holds the y-integral of ``||xi||^2`` (window
    doubling with a decay-exponent tail estimate) and the normalized integral
    ``int (P[|M|^2]/|M|^2 - 1) dy = 2x int ||xi||^2 dy`` over the scaled
    window ``|y| < scaled_window * x``.  A positive fitted slope of the
    scaled normalized form against ``x`` contradicts the ``o(x)`` necessary
    condition; the ratio trend is reported, never a verdict on a limit.
    """
    xs = [float(x) for x in xs]
    if not xs or min(xs) <= 0:
        raise InvalidParameterError("x-list must be positive")
    for x in xs:
        _pole_check(M, complex(x))
    sym = bool(M.conj_symmetric)
    rep = ClassificationReport()
    vals, statuses, scaled = [], [], []
    for x in xs:
        g = lambda y, x=x: xi_norm_line(M, x, y)
        part, tail, W, hist = _windowed(g, max(8.0 * x, 8.0), sym, tol, cap)
        if tail <= 0.1 * abs(part):
            st = "converged"
        elif _doubling_fail(hist) or (math.isinf(tail) and _log_growth(hist)):
            st = "divergent"
        else:
            st = "unresolved"
        sc, _, _, _ = _windowed(g, scaled_window * x, sym, tol=np.inf, cap=scaled_window * x,
                                base=scaled_window * x / 2 ** 12)
        sc *= 2 * x
        if st == "converged":
            part += tail
        rep.hd2_samples.append({"x": x, "integral": part, "tail": tail, "window": W,
                                "status": st, "normalized_scaled": sc,
                                "scaled_window": scaled_window * x})
        vals.append(part)
        statuses.append(st)
        scaled.append(sc)
    order = np.argsort(xs)
    xv, vv = np.array(xs)[order], np.array(vals)[order]
    sts = [statuses[i] for i in order]
    nonincreasing = bool(np.all(np.diff(vv) <= 1e-6 * np.maximum(1.0, np.abs(vv[1:]))))
    if all(s == "converged" for s in sts):
        status = PASS if nonincreasing else FAIL
    elif any(s == "divergent" for s in sts):
        status = FAIL
    else:
        status = INCONCLUSIVE
    rep.verdicts["hd2_bound"] = Verdict(status, {
        "x": xv.tolist(), "integral": vv.tolist(), "tail_status": sts,
        "nonincreasing": nonincreasing,
        "note": "sampled x-list stands in for the existential threshold"})
    sc = np.array(scaled)[order]
    slope, icpt = np.polyfit(xv, sc, 1) if len(xv) > 1 else (float("nan"), float("nan"))
    rep.verdicts["normalized_growth"] = Verdict(INCONCLUSIVE, {
        "x": xv.tolist(), "normalized_scaled": sc.tolist(), "ratio_to_x": (sc / xv).tolist(),
        "fitted_slope": float(slope), "intercept": float(icpt),
        "note": "o(x) statement: ratio trend reported, no limit verdict"})
    return rep


def hd2_tauberian_side(M: HalfDensity, x: float, tol: float = 1e-6) -> float:
    """``(1/2pi) int ||xi_{M,x+iy}||^2 dy`` (right side of the Tauberian identity)."""
    part, tail, _, _ = _windowed(lambda y: xi_norm_line(M, x, y), max(8.0 * x, 8.0),
                                 bool(M.conj_symmetric), tol)
    return (part + (tail if math.isfinite(tail) else 0.0)) / (2 * np.pi)


# ---------------------------------------------------------------------------
# factorization components


def _series_verdict(term: Callable, N: int = 64, cap: int = 2 ** 20):
    """Partial sums ``S(N), S(2N), S(4N), ...`` of ``sum_{n>=1} term(n)``.

    Pass when the last two increments shrink at least geometrically with a
    tail estimate below 10% of the sum; fail when the partial sum doubles
    twice in a row; inconclusive at the cap.
    """
    partial, n, hist = 0.0, 1, []
    while True:
        partial += math.fsum(term(k) for k in range(n, N + 1))
        hist.append((N, partial))
        n = N + 1
        if len(hist) >= 3:
            d1 = hist[-2][1] - hist[-3][1]
            d2 = hist[-1][1] - hist[-2][1]
            if abs(d2) <= 1e-15 * abs(partial):
                return PASS, partial, abs(d2), hist
            if d1 > 0 and 0 <= d2 <= 0.75 * d1:
                r = d2 / d1
                tail = d2 * r / (1 - r)
                if tail <= 0.1 * abs(partial):
                    return PASS, partial, tail, hist
            if _doubling_fail([(0, h[1], 0) for h in hist]):
                return FAIL, partial, float("inf"), hist
        if N >= cap:
            return INCONCLUSIVE, partial, float("nan"), hist
        N *= 2


def factorization_tests(zeros=(), singular=(0.0, ()), rho: Optional[BoundaryDensity] = None,
                        xs: Sequence[float] = (4.0,), y_grid: Optional[np.ndarray] = None) -> dict:
    """Verdicts for the Blaschke, singular-inner and outer components.

    ``zeros`` is a finite list or a callable ``n -> beta_n`` (n >= 1);
    ``singular = (sigma, atoms)`` with ``atoms`` a list of ``(lam, mass)``;
    ``rho`` is the boundary log-modulus ``log |M(i lam)|^2``.
    """
    out = {}
    if callable(zeros):
        st, s, tail, hist = _series_verdict(lambda n: complex(zeros(n)).real)
        out["blaschke"] = Verdict(st, {"sum_re": s, "tail": tail, "terms": hist[-1][0]})
    else:
        z = [complex(b) for b in zeros]
        if any(b.real <= 0 for b in z):
            raise DomainError("Blaschke zeros must lie in the right half-plane")
        out["blaschke"] = Verdict(PASS, {"sum_re": math.fsum(b.real for b in z), "count": len(z)})
    sigma, atoms = singular
    mom = math.fsum((1 + float(l) ** 2) * float(m) for l, m in atoms)
    ok = sigma == 0 and math.isfinite(mom)
    out["singular"] = Verdict(PASS if ok else FAIL, {"sigma": float(sigma), "moment": mom})
    if rho is not None:
        out["outer"] = outer_test(rho, xs, y_grid)
    return out


def outer_test(rho: BoundaryDensity, xs: Sequence[float], y_grid=None) -> Verdict:
    """``E(z) = log P[e^rho](z) - P[rho](z)``: its sup over ``y`` and its windowed y-integral."""
    erho = BoundaryDensity(lambda l: np.exp(rho(l)), "log" if rho.growth != "bounded" else "bounded",
                           breakpoints=rho.breakpoints)

    def E(x, ys):
        return np.log(poisson_line(erho, x, ys)) - poisson_line(rho, x, ys)

    sups, ints, tails = [], [], []
    for x in xs:
        ys = np.linspace(-64 * x, 64 * x, 257) if y_grid is None else np.asarray(y_grid)
        sups.append(float(np.max(E(x, ys))))
        part, tail, _, _ = _windowed(lambda y, x=x: E(x, y), 8.0 * x, False, 1e-2, 2.0 ** 16)
        ints.append(part)
        tails.append(tail)
    finite = all(math.isfinite(t) and t <= 0.1 * abs(p) for p, t in zip(ints, tails))
    status = PASS if finite and all(math.isfinite(s) for s in sups) else INCONCLUSIVE
    return Verdict(status, {"x": list(map(float, xs)), "sup_E": sups, "int_E": ints, "tail": tails})


# ---------------------------------------------------------------------------
# boundary-weight conditions


def _arc_integral(f: Callable, a: float, b: float, sings=()):
    """``int_a^b f`` where ``f ~ |theta - s|^g`` near each ``(s, g)`` in ``sings``.

    The arc is split at interior singular points and each piece that ends at
    one is integrated with QUADPACK's algebraic end-point weight.
    """
    cuts = sorted({a, b, *[s for s, _ in sings if a < s < b]})
    gam = dict(sings)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        ga = gam.get(lo, 0.0)
        gb = gam.get(hi, 0.0)
        if ga <= -1 or gb <= -1:
            return float("inf")
        if ga == 0 and gb == 0:
            total += integrate.quad(f, lo, hi, limit=400, epsabs=0, epsrel=1e-11)[0]
            continue
        eps = 1e-15 * max(1.0, abs(lo), abs(hi))

        def smooth(t, lo=lo, hi=hi, ga=ga, gb=gb):
            t = min(max(t, lo + eps), hi - eps)
            return f(t) / ((t - lo) ** ga * (hi - t) ** gb)

        total += integrate.quad(smooth, lo, hi, weight="alg", wvar=(ga, gb), limit=400,
                                epsabs=0, epsrel=1e-11)[0]
    return total


def a2_condition(w: Callable, J: int, singular=None) -> dict:
    """Worst ``(1/|I|^2) int_I w int_I 1/w`` over dyadic arcs of the circle.

    Arcs have lengths ``2 pi 2^-j`` for ``j = 0..J`` at all positions that
    are multiples of half their length, so a point such as ``theta = 0`` is
    met both as an endpoint and as a midpoint.  ``singular`` lists
    ``(theta, gamma)`` with ``w ~ |t - theta|^gamma`` near ``theta``; by
    default it is read from ``w.singularities``.  Returns the per-level
    worst constants, the overall worst and its arc; a non-integrable ``w``
    or ``1/w`` gives ``worst = inf`` with that arc as witness.
    """
    if singular is None:
        singular = getattr(w, "singularities", ())
    sing = [(((s + np.pi) % (2 * np.pi)) - np.pi, float(g)) for s, g in singular]
    # a singular point at -pi also sits at pi
    sing += [(np.pi, g) for s, g in sing if s == -np.pi]
    inv = [(s, -g) for s, g in sing]
    winv = lambda t: 1.0 / w(t)
    per_level, worst, witness = [], 0.0, None
    for j in range(J + 1):
        L = 2 * np.pi * 2.0 ** -j
        best, arc = 0.0, None
        for a in -np.pi + np.arange(2 ** (j + 1)) * L / 2:
            b = a + L
            # snap round-off neighbours of singular points onto them
            for s, _ in sing:
                if abs(a - s) < 1e-12:
                    a = s
                if abs(b - s) < 1e-12:
                    b = s
            # arcs running past pi wrap around to -pi
            pieces = [(a, min(b, np.pi))] + ([(-np.pi, b - 2 * np.pi)] if b > np.pi + 1e-12 else [])
            iw = sum(_arc_integral(w, p, q, sing) for p, q in pieces)
            iv = sum(_arc_integral(winv, p, q, inv) for p, q in pieces)
            c = iw * iv / L ** 2
            if not math.isfinite(c):
                per_level.append(float("inf"))
                return {"levels": per_level, "worst": float("inf"), "witness": (float(a), float(b))}
            if c > best:
                best, arc = c, (float(a), float(b))
        per_level.append(best)
        if best > worst:
            worst, witness = best, arc
    return {"levels": per_level, "worst": worst, "witness": witness}


def circle_power_density(alpha: float) -> Callable:
    """``2^(1-2 alpha) |sin(theta/2)|^(-2 alpha)``, singular like ``|theta|^(-2 alpha)`` at 0."""
    def w(t):
        return 2.0 ** (1 - 2 * alpha) * abs(math.sin(t / 2)) ** (-2 * alpha)
    w.singularities = ((0.0, -2 * alpha),)
    return w


def a2_limit_constant(alpha: float) -> float:
    """Limit of the A2 ratio on arcs shrinking to a ``|theta|^(-2 alpha)`` point."""
    return 1.0 / ((1 - 2 * alpha) * (1 + 2 * alpha))


def sobolev_condition(u: Callable, deltas=(2.0 ** -4, 2.0 ** -5, 2.0 ** -6), singular=()) -> Verdict:
    """``D(delta) = int int_{|s-t| >= delta} |u(s) - u(t)|^2 / |s-t|^2 ds dt``.

    Computed as ``2 int_delta^inf h^-2 int |u(s+h) - u(s)|^2 ds dh``.  The
    verdict comes from the increments ``D(delta/2) - D(delta)``: shrinking
    geometrically (ratio <= 0.6) means finite, not shrinking (>= 0.85) means
    divergent.
    """
    sing = list(singular)

    def inner(h):
        pts = sorted(set(sing + [s - h for s in sing]))
        f = lambda s: abs(u(s + h) - u(s)) ** 2
        lo, hi = (min(pts) - 1.0, max(pts) + 1.0) if pts else (-1.0, 1.0)
        mid = integrate.quad(f, lo, hi, points=pts or None, limit=400, epsabs=1e-13, epsrel=1e-10)[0]
        left = integrate.quad(f, -np.inf, lo, limit=400, epsabs=1e-13, epsrel=1e-10)[0]
        right = integrate.quad(f, hi, np.inf, limit=400, epsabs=1e-13, epsrel=1e-10)[0]
        return mid + left + right

    ds = sorted(deltas, reverse=True)
    far = integrate.quad(lambda h: inner(h) / h ** 2, ds[0], np.inf, limit=200, epsabs=1e-12, epsrel=1e-8)[0]
    D = [2 * far]
    for a, b in zip(ds[:-1], ds[1:]):
        piece = integrate.quad(lambda h: inner(h) / h ** 2, b, a, limit=200, epsabs=1e-13, epsrel=1e-9)[0]
        D.append(D[-1] + 2 * piece)
    inc = np.diff(D)
    if len(inc) >= 2 and inc[-2] > 0:
        ratio = float(inc[-1] / inc[-2])
    else:
        ratio = 0.0 if np.all(np.abs(inc) < 1e-14) else float("nan")
    if ratio <= 0.6:
        status = PASS
    elif ratio >= 0.85:
        status = FAIL
    else:
        status = INCONCLUSIVE
    return Verdict(status, {"delta": ds, "D": D, "increment_ratio": ratio})


# ---------------------------------------------------------------------------
# small-t laws


@dataclass
class AsymptoticLaw:
    case: str
    predict: Callable
    exponent: Optional[float]
    constant: Optional[float]
    self_check: float
    params: dict

    def to_dict(self):
        return _clean({"case": self.case, "exponent": self.exponent, "constant": self.constant,
                       "self_check": self.self_check, **self.params})


def _m_phi_check(phi: ProfileFunction, a: float) -> float:
    """Relative gap between the two sides of the Fubini identity
    ``int_t0^a m_phi = int_t0^a s |phi(s)|^2 ds + a m_phi(a) - t0 m_phi(t0)``.

    The left side integrates the closed-form tail ``m_phi = tail_sq``, the
    right side ``|phi|^2`` itself, so the check also exercises ``tail_sq``.
    Singular profiles start at ``t0 = 1e-12 a`` and are integrated in ``log t``.
    """
    f2 = lambda s: abs(phi(s)) ** 2
    m = lambda t: float(phi.tail_sq(t))
    if phi.singular:
        t0 = 1e-12 * a
        lo, hi = np.log(t0), np.log(a)
        pts = [np.log(p) for p in phi.breakpoints if t0 < p < a]
        lhs = integrate.quad(lambda u: m(np.exp(u)) * np.exp(u), lo, hi, points=pts or None,
                             limit=400, epsrel=1e-10)[0]
        rhs = integrate.quad(lambda u: np.exp(2 * u) * f2(np.exp(u)), lo, hi, points=pts or None,
                             limit=400, epsrel=1e-10)[0]
    else:
        t0 = 0.0
        pts = [p for p in phi.breakpoints if 0 < p < a]
        lhs = integrate.quad(m, 0.0, a, points=pts or None, limit=200, epsrel=1e-10)[0]
        rhs = integrate.quad(lambda s: s * f2(s), 0.0, a, points=pts or None, limit=200)[0]
    rhs += a * m(a) - (t0 * m(t0) if t0 > 0 else 0.0)
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


def asymptotic_predict(phi: ProfileFunction, check_at: float = 0.25) -> AsymptoticLaw:
    """Predicted small-t law of ``||K_t||_HS^2`` from the profile's behaviour at 0."""
    form = phi.form
    names = {"power": ("alpha", "scale"), "log-power": ("C", "beta")}.get(form, ())
    p = dict(zip(names, phi.params))
    if form == "zero":
        raise UnsupportedCaseError("zero profile: the kernel vanishes, no law to predict")
    if form == "power":
        al, sc = float(p["alpha"]), abs(complex(p["scale"]))
        if al > 0.5:
            n2 = phi.l2_norm_sq()
            return AsymptoticLaw("square-integrable", lambda t: n2 * np.asarray(t), 1.0, n2,
                                 _m_phi_check(phi, check_at), {"norm_sq": n2})
        if al == 0.5:
            raise UnsupportedCaseError("power profile with alpha = 1/2 is the log-corrected case")
        c = sc ** 2 / (2 * al * (1 - 2 * al))
        return AsymptoticLaw("regularly-varying", lambda t: c * np.asarray(t) ** (2 * al), 2 * al, c,
                             _m_phi_check(phi, check_at), {"alpha": al, "L0": sc})
    if form == "log-power":
        C, beta = abs(complex(p["C"])), float(p["beta"])
        if not beta > 1:
            raise UnsupportedCaseError("log-power law needs beta > 1")
        c = C ** 2 / (2 * beta - 1)
        return AsymptoticLaw("slowly-varying", lambda t: c * np.log(1 / np.asarray(t)) ** (1 - 2 * beta),
                             None, c, _m_phi_check(phi, min(check_at, 0.3)), {"beta": beta, "C": C})
    if form in ("exponential", "indicator", "table"):
        n2 = phi.l2_norm_sq()
        return AsymptoticLaw("square-integrable", lambda t: n2 * np.asarray(t), 1.0, n2,
                             _m_phi_check(phi, check_at), {"norm_sq": n2})
    raise UnsupportedCaseError(f"no small-t law for profile form {form!r}")


def asymptotic_fit(t, v, law: Optional[AsymptoticLaw] = None, min_points: int = 6) -> dict:
    """Log-log regression of the curve over its smallest decade of ``t``.

    For slowly-varying laws the constant is fitted instead, with the model
    ``v (log 1/t)^(2 beta - 1) = c0 + c1 / log(1/t)``.
    """
    t = np.asarray(t, float)
    v = np.asarray(v, float)
    m = (t > 0) & np.isfinite(v)
    t, v = t[m], v[m]
    if t.size == 0 or np.all(v <= 0):
        raise InvalidParameterError("degenerate curve: nothing to fit")
    win = t <= 10 * t.min()
    tw, vw = t[win], v[win]
    if tw.size < min_points:
        raise InvalidParameterError(f"only {tw.size} points in the fit window (need {min_points})")
    out = {"t_min": float(tw.min()), "t_max": float(tw.max()), "points": int(tw.size)}
    if law is not None and law.case == "slowly-varying":
        beta = law.params["beta"]
        Lg = np.log(1 / tw)
        y = vw * Lg ** (2 * beta - 1)
        A = np.vstack([np.ones_like(Lg), 1 / Lg]).T
        coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
        dof = max(tw.size - 2, 1)
        s2 = float(res[0]) / dof if res.size else 0.0
        cov = s2 * np.linalg.inv(A.T @ A)
        half = stats.t.ppf(0.975, dof) * math.sqrt(max(cov[0, 0], 0.0))
        out.update(constant=float(coef[0]), constant_ci=[float(coef[0] - half), float(coef[0] + half)],
                   correction=float(coef[1]), exponent=None)
        out["relative_deviation"] = float(coef[0] / law.constant - 1)
        return out
    r = stats.linregress(np.log(tw), np.log(vw))
    half = stats.t.ppf(0.975, max(tw.size - 2, 1)) * r.stderr
    out.update(exponent=float(r.slope), exponent_ci=[float(r.slope - half), float(r.slope + half)],
               constant=float(math.exp(r.intercept)))
    if law is not None:
        out["relative_deviation"] = float(np.median(vw / law.predict(tw)) - 1)
        if law.exponent is not None:
            out["exponent_deviation"] = float(r.slope - law.exponent)
    return out


def growth_condition(M: HalfDensity, xs=(4, 8, 16, 32, 64, 128, 256)) -> Verdict:
    """``sqrt(x) |M(x)|`` increasing along ``xs`` (necessary for generating a semigroup)."""
    v = [math.sqrt(x) * abs(complex(M(complex(x)))) for x in xs]
    inc = all(b > a for a, b in zip(v, v[1:]))
    return Verdict(PASS if inc else FAIL, {"x": list(map(float, xs)), "sqrt_x_abs_M": v})


def classify(M: HalfDensity, xs=(1.0, 2.0, 4.0), phi: Optional[ProfileFunction] = None) -> ClassificationReport:
    """hd2 criterion, growth condition and (for profiles) the small-t prediction."""
    rep = hd2_criterion(M, xs)
    rep.verdicts["growth"] = growth_condition(M)
    if phi is not None:
        try:
            rep.fit = asymptotic_predict(phi).to_dict()
        except UnsupportedCaseError as e:
            rep.fit = {"case": "unsupported", "reason": str(e)}
    return rep


def small_t_study(phi: ProfileFunction, grid, t_min: float, t_max: Optional[float] = None) -> dict:
    """HS curve of the profile's kernel on ``[t_min, t_max]`` with prediction and fit.

    Only kernel rows up to ``t_max`` are built; the curve is sampled at the
    grid nodes in the range (log-spaced points when fewer than 12 nodes fall
    inside), so a graded grid puts many points in the smallest decade.
    """
    from .kernel import build_kernel
    from .semigroup import PerturbedSemigroup, hs_curve

    t_max = 10.0 * t_min if t_max is None else float(t_max)
    law = asymptotic_predict(phi)
    x = grid.nodes
    cut = x[min(np.searchsorted(x, t_max * (1 - 1e-12)), x.size - 1)]
    k = build_kernel(phi, None, grid, x_cut=cut * (1 + 1e-12))
    ts = x[(x >= t_min) & (x <= t_max)]
    if ts.size < 12:
        # too few nodes in the window: sample it logarithmically instead
        ts = np.geomspace(t_min, t_max, 16)
    curve = hs_curve(PerturbedSemigroup(k), ts)
    fit = asymptotic_fit(curve.t, curve.value, law)
    return {"law": law.to_dict(), "fit": fit, "t": curve.t.tolist(), "hs_sq": curve.value.tolist(),
            "predicted": np.asarray(law.predict(curve.t), float).tolist()}


def geometric_mean_density(M1: HalfDensity, M2: HalfDensity) -> HalfDensity:
    """``sqrt(M1 M2)`` with boundary density ``sqrt(rho1 rho2)`` (outer functions only)."""
    r1, r2 = M1.boundary, M2.boundary
    rho = BoundaryDensity(lambda l: np.sqrt(r1(l) * r2(l)),
                          "power" if "power" in (r1.growth, r2.growth) else
                          ("log" if "log" in (r1.growth, r2.growth) else "bounded"),
                          0.5 * (r1.exponent + r2.exponent),
                          tuple(sorted(set(r1.breakpoints) | set(r2.breakpoints))))
    return HalfDensity(lambda z: np.sqrt(M1(z) * M2(z)), rho,
                       bool(M1.conj_symmetric and M2.conj_symmetric),
                       {"kind": "geometric-mean", "parts": [M1.provenance, M2.provenance]})
