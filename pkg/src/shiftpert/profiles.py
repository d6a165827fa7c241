"""Closed-form and tabulated profile functions on the half-line."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .numerics import GridFunction, InvalidParameterError

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_INV_E = math.exp(-1.0)


def _gauss_moments(f, lo, hi):
    """Moments ``int f`` and ``int (v - lo) f`` over ``[lo, hi]`` by 8-point Gauss."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    half = 0.5 * (hi - lo)
    v = (lo + half)[..., None] + half[..., None] * _GL_X
    fv = f(v) * _GL_W
    I0 = half * fv.sum(-1)
    I1 = half * (fv * (v - lo[..., None])).sum(-1)
    return I0, I1


def _upper_gamma(a: float, x):
    """Upper incomplete gamma ``Gamma(a, x)`` for ``a > -1``; ``inf`` at ``x = 0`` when ``a <= 0``."""
    x = np.asarray(x, dtype=float)
    if a > 0:
        return special.gamma(a) * special.gammaincc(a, x)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if a == 0:
            out = special.exp1(x)
        else:
            # Gamma(a, x) = (Gamma(a+1, x) - x^a e^-x) / a
            out = (special.gamma(a + 1) * special.gammaincc(a + 1, x) - x ** a * np.exp(-x)) / a
    return np.where(x > 0, out, np.inf)


@dataclass(frozen=True)
class ProfileFunction:
    """Generating profile ``phi`` of a perturbed shift semigroup.

    Parameters
    ----------
    form : str
        One of ``"zero"``, ``"exponential"``, ``"power"``, ``"indicator"``,
        ``"log-power"`` and ``"table"``.
    params : tuple
        Form parameters:

        * exponential ``(c, d)``: ``c exp(-d x)``;
        * power ``(alpha, scale)``: ``scale x^(alpha-1) exp(-x)``;
        * indicator ``(a, b)``: indicator of ``(a, b)``;
        * log-power ``(C, beta)``: ``C / (x log(1/x)^beta)`` on ``(0, 1/e)``;
        * table ``(GridFunction,)``: linear interpolation, zero past the grid.
    """

    form: str
    params: tuple = ()

    def __post_init__(self):
        forms = ("zero", "exponential", "power", "indicator", "log-power", "table")
        if self.form not in forms:
            raise InvalidParameterError(f"unknown profile form {self.form!r}")
        p = self.params
        if self.form == "power" and not 0 < p[0] <= 1:
            raise InvalidParameterError("power profile needs 0 < alpha <= 1")
        if self.form == "indicator" and not 0 <= p[0] < p[1]:
            raise InvalidParameterError("indicator needs 0 <= a < b")
        if self.form == "log-power" and not p[1] > 1:
            raise InvalidParameterError("log-power profile needs beta > 1")

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def exponential(cls, c=1.0, d=1.0):
        return cls("exponential", (complex(c), complex(d)))

    @classmethod
    def power(cls, alpha, scale=1.0):
        return cls("power", (float(alpha), complex(scale)))

    @classmethod
    def indicator(cls, a=0.0, b=1.0):
        return cls("indicator", (float(a), float(b)))

    @classmethod
    def log_power(cls, C=1.0, beta=2.0):
        return cls("log-power", (complex(C), float(beta)))

    @classmethod
    def table(cls, f: GridFunction):
        return cls("table", (f,))

    # basic properties ---------------------------------------------------
    @property
    def singular(self) -> bool:
        """True when ``phi`` is unbounded at the origin."""
        return (self.form == "power" and self.params[0] < 1) or self.form == "log-power"

    @property
    def is_real(self) -> bool:
        if self.form in ("exponential", "power", "log-power"):
            return all(abs(complex(v).imag) == 0 for v in self.params)
        if self.form == "table":
            return bool(np.all(self.params[0].values.imag == 0))
        return True

    @property
    def breakpoints(self) -> tuple:
        if self.form == "indicator":
            return tuple(v for v in self.params if v > 0)
        if self.form == "log-power":
            return (np.exp(-1.0),)
        return ()

    @property
    def growth_bound(self) -> float:
        """Infimum of ``a`` with ``exp(-a x) phi`` integrable."""
        if self.form == "exponential":
            return -self.params[1].real
        if self.form == "power":
            return -1.0
        if self.form == "table":
            return 0.0
        return -np.inf

    def to_dict(self) -> dict:
        if self.form == "table":
            return {"form": "table", "grid": self.params[0].grid.to_dict()}
        out = {"form": self.form}
        names = {"exponential": ("c", "d"), "power": ("alpha", "scale"),
                 "indicator": ("a", "b"), "log-power": ("C", "beta")}.get(self.form, ())
        for k, v in zip(names, self.params):
            v = complex(v)
            out[k] = v.real if v.imag == 0 else [v.real, v.imag]
        return out

    # evaluation ---------------------------------------------------------
    def scalar(self, x: float) -> complex:
        """Fast scalar evaluation for the closed forms (used inside adaptive quadrature)."""
        p = self.params
        if x < 0 or self.form == "zero":
            return 0j
        if self.form == "exponential":
            return p[0] * cmath.exp(-p[1] * x)
        if self.form == "power" and x > 0:
            return p[1] * x ** (p[0] - 1) * math.exp(-x)
        if self.form == "log-power":
            if x == 0:
                return complex(math.inf)
            return p[0] / (x * math.log(1.0 / x) ** p[1]) if x < _INV_E else 0j
        return complex(self(x))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.form == "zero":
                out = np.zeros(x.shape, dtype=complex)
            elif self.form == "exponential":
                out = p[0] * np.exp(-p[1] * x)
            elif self.form == "power":
                out = p[1] * np.power(x, p[0] - 1) * np.exp(-x)
                if p[0] == 1:
                    out = p[1] * np.exp(-x) + 0j
            elif self.form == "indicator":
                out = ((x > p[0]) & (x < p[1])).astype(complex)
                # midpoint value at jumps keeps the trapezoid rule symmetric
                at_a = np.isclose(x, p[0], rtol=0, atol=1e-13)
                out = out + np.where(p[0] > 0, 0.5, 1.0) * at_a
                out = out + 0.5 * np.isclose(x, p[1], rtol=0, atol=1e-13)
            elif self.form == "log-power":
                L = np.log(1.0 / x)
                out = np.where((x > 0) & (x < np.exp(-1.0)), p[0] / (x * L ** p[1]), 0.0)
                out = np.where(x == 0, np.inf, out).astype(complex)
            else:
                f = p[0]
                out = f(x)
        return np.where(x < 0, 0.0, out)

    def laplace(self, z):
        """Closed-form Laplace transform (quadrature for forms without one)."""
        z = np.asarray(z, dtype=complex)
        p = self.params
        if self.form == "zero":
            return np.zeros(z.shape, dtype=complex)
        if self.form == "exponential":
            return p[0] / (z + p[1])
        if self.form == "power":
            return p[1] * special.gamma(p[0]) * (1 + z) ** (-p[0])
        if self.form == "indicator":
            a, b = p
            with np.errstate(invalid="ignore", divide="ignore"):
                val = (np.exp(-a * z) - np.exp(-b * z)) / z
            return np.where(np.abs(z) < 1e-12, b - a, val)
        if self.form == "table":
            f = p[0]
            return np.vectorize(lambda s: complex(np.dot(f.grid.weights, f.values * np.exp(-s * f.nodes))))(z)
        return np.vectorize(self._laplace_quad)(z)

    def _laplace_quad(self, z):
        C, beta = self.params
        x0 = np.exp(-1.0)
        # substitute x = exp(-s) to tame the logarithmic singularity
        def g(s, part):
            x = np.exp(-s)
            v = C * np.exp(-z * x) / s**beta
            return v.real if part == 0 else v.imag
        re, _ = integrate.quad(g, 1.0, np.inf, args=(0,), limit=400)
        im, _ = integrate.quad(g, 1.0, np.inf, args=(1,), limit=400)
        return complex(re, im)

    # integrals ----------------------------------------------------------
    def cell_moments(self, lo, hi):
        """Exact or high-order moments over cells ``[lo, hi]``.

        Returns ``(I0, I1)`` with ``I0 = int phi`` and ``I1 = int (v - lo) phi``.
        """
        lo = np.maximum(np.asarray(lo, dtype=float), 0.0)
        hi = np.maximum(np.asarray(hi, dtype=float), lo)
        p = self.params
        h = hi - lo
        if self.form == "zero":
            z = np.zeros(np.broadcast(lo, hi).shape, dtype=complex)
            return z, z.copy()
        if self.form == "exponential":
            c, d = p
            dh = d * h
            small = np.abs(dh) < 1e-3
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                e = np.exp(-d * lo)
                m0 = np.where(small, h * (1 - dh / 2 + dh**2 / 6 - dh**3 / 24),
                              -np.expm1(-dh) / d)
                m1 = np.where(small, h**2 * (0.5 - dh / 3 + dh**2 / 8 - dh**3 / 30),
                              (1 - np.exp(-dh) * (1 + dh)) / d**2)
            return c * e * m0, c * e * m1
        if self.form == "indicator":
            a, b = p
            l2 = np.clip(lo, a, b)
            h2 = np.clip(hi, a, b)
            I0 = (h2 - l2).astype(complex)
            I1 = 0.5 * ((h2 - lo) ** 2 - (l2 - lo) ** 2) + 0j
            return I0, I1
        if self.form == "power":
            alpha, s = p
            near = lo < h
            I0, I1 = _gauss_moments(self, np.where(near, 1.0, lo), np.where(near, 2.0, hi))
            ga = special.gamma(alpha)
            ga1 = special.gamma(alpha + 1)
            J0 = ga * (special.gammainc(alpha, hi) - special.gammainc(alpha, lo))
            J1 = ga1 * (special.gammainc(alpha + 1, hi) - special.gammainc(alpha + 1, lo)) - lo * J0
            return np.where(near, s * J0, I0), np.where(near, s * J1, I1)
        if self.form == "log-power":
            C, beta = p
            shape = np.broadcast(lo, hi).shape
            lo, hi = (np.broadcast_to(v, shape).ravel() for v in (lo, hi))
            x0 = np.exp(-1.0)
            hi_c = np.minimum(hi, x0)
            lo_c = np.minimum(lo, x0)
            with np.errstate(divide="ignore"):
                P = lambda v: np.where(v > 0, np.log(1.0 / np.maximum(v, 1e-300)) ** (1 - beta), 0.0) / (beta - 1)
            near = lo_c < (hi_c - lo_c)
            J0 = C * (P(hi_c) - P(lo_c))
            I0, I1 = _gauss_moments(self, lo_c, np.maximum(hi_c, lo_c))
            # near the origin v phi = C / log(1/v)^beta has an unbounded
            # derivative; integrate it in s = log(1/v) instead
            for k in np.flatnonzero(near & (hi_c > lo_c)):
                s_lo = np.log(1.0 / hi_c[k])
                s_hi = np.log(1.0 / lo_c[k]) if lo_c[k] > 0 else np.inf
                v = integrate.quad(lambda u: np.exp(-u) * u ** -beta, s_lo, s_hi, epsabs=0, epsrel=1e-12)[0]
                I1[k] = C * v - lo[k] * J0[k]
            return np.where(near, J0, I0).reshape(shape), I1.reshape(shape)
        # table: linear between samples
        f0 = self(lo)
        f1 = self(hi)
        return 0.5 * h * (f0 + f1), h * h * (f0 / 6 + f1 / 3)

    def weighted_l1(self, a: float) -> float:
        """``int_0^inf |phi(x)| exp(-a x) dx``."""
        p = self.params
        if self.form == "zero":
            return 0.0
        if self.form == "exponential":
            den = p[1].real + a
            return abs(p[0]) / den if den > 0 else np.inf
        if self.form == "power":
            return abs(p[1]) * special.gamma(p[0]) * (1 + a) ** (-p[0]) if a > -1 else np.inf
        if self.form == "indicator":
            lo, hi = p
            return (np.exp(-a * lo) - np.exp(-a * hi)) / a if a != 0 else hi - lo
        if self.form == "log-power":
            C, beta = p
            v, _ = integrate.quad(lambda s: np.exp(-a * np.exp(-s)) / s**beta, 1.0, np.inf)
            return abs(C) * v
        f = p[0]
        return float(np.dot(f.grid.weights, np.abs(f.values) * np.exp(-a * f.nodes)))

    def tail_sq(self, t):
        """``m(t) = int_t^inf |phi|^2``, vectorized in ``t``."""
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.form == "zero":
            return np.zeros(t.shape)
        if self.form == "exponential":
            c, d = p
            return abs(c) ** 2 * np.exp(-2 * d.real * t) / (2 * d.real)
        if self.form == "indicator":
            a, b = p
            return np.clip(b - np.maximum(t, a), 0, None)
        if self.form == "power":
            alpha, s = p
            e = 2 * alpha - 2
            # int_t^inf x^e exp(-2x) dx = 2^-(e+1) Gamma(e+1, 2t)
            return abs(s) ** 2 * 2.0 ** (-(e + 1)) * _upper_gamma(e + 1, 2 * t)
        if self.form == "log-power":
            C, beta = p
            x0 = np.exp(-1.0)
            def one(u):
                if u >= x0:
                    return 0.0
                if u <= 0:
                    return np.inf
                # x = exp(-s): int_{1}^{log 1/u} e^{s} s^{-2 beta} ds
                v, _ = integrate.quad(lambda s: np.exp(s) / s ** (2 * beta), 1.0, np.log(1 / u), limit=400)
                return abs(C) ** 2 * v
            return np.vectorize(one)(t)
        f = p[0]
        vals = np.abs(f.values) ** 2
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(f.nodes) * (vals[1:] + vals[:-1]))])
        return cum[-1] - np.interp(t, f.nodes, cum, right=cum[-1])

    def l2_norm_sq(self) -> float:
        return float(self.tail_sq(0.0))

    def admissibility_integral(self) -> float:
        """``int |phi|^2 min(1, x) dx``, finite for admissible profiles."""
        def g(x):
            return abs(complex(self(x))) ** 2 * min(1.0, x)
        pts = [b for b in self.breakpoints if 0 < b < 1]
        a, _ = integrate.quad(g, 0, 1, points=pts or None, limit=400)
        return a + float(self.tail_sq(1.0))

    def mass_near_zero(self, eps: float) -> float:
        """``int_0^eps |phi|``."""
        I0, _ = self.cell_moments(np.array([0.0]), np.array([eps]))
        if self.is_real and self.form != "table":
            return abs(complex(I0[0]))
        v, _ = integrate.quad(lambda x: abs(complex(self(x))), 0, eps, limit=200)
        return v
