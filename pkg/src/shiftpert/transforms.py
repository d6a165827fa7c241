"""Laplace transforms, Poisson and Plancherel boundary integrals, Bromwich inversion."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .numerics import DomainError, GridFunction

W_CAP = 2.0**20


class AccuracyWarning(UserWarning):
    """Emitted when a truncated integral could not reach its tolerance."""


@dataclass(frozen=True)
class BoundaryDensity:
    """Real density on the imaginary axis.

    Parameters
    ----------
    evaluator : callable
        Vectorized ``lam -> rho(lam)``.
    growth : {"bounded", "log", "power"}
        Integrability class used to estimate tails beyond a window.
    exponent : float
        Growth exponent for the ``"power"`` class (must be < 1 for Poisson).
    breakpoints : tuple
        Points where ``rho`` is not smooth; passed to the adaptive quadrature.
    extension : callable or None
        Closed-form harmonic extension ``z -> P[rho](z)`` when known; used
        by batched evaluators for densities that oscillate at infinity.
    """

    evaluator: Callable
    growth: str = "bounded"
    exponent: float = 0.0
    breakpoints: tuple = ()
    extension: Optional[Callable] = None

    def __call__(self, lam):
        return self.evaluator(lam)

    def tail_exponent(self) -> float:
        if self.growth == "power":
            return float(self.exponent)
        if self.growth == "log":
            return 0.1
        return 0.0


@dataclass
class IntegralResult:
    """Value of a truncated integral with its bookkeeping."""

    value: float
    tail: float
    window: float
    converged: bool = True
    notes: list = field(default_factory=list)

    def __float__(self):
        return float(self.value)


def laplace_transform(f, z: complex, growth: float = 0.0) -> complex:
    """Laplace transform ``int_0^inf f(x) exp(-z x) dx``.

    ``f`` is either a :class:`GridFunction` (trapezoid quadrature on the
    grid, so the tail beyond ``x_max`` is dropped) or any object with a
    ``laplace(z)`` method, whose closed form is then used.
    """
    z = complex(z)
    if not z.real > growth:
        raise DomainError(f"Laplace transform needs Re z > {growth}, got {z}")
    if isinstance(f, GridFunction):
        w = f.grid.weights
        return complex(np.dot(w, f.values * np.exp(-z * f.nodes)))
    return complex(f.laplace(z))


def _quad(g, a, b, points=None):
    pts = None
    if points:
        pts = sorted(p for p in points if a < p < b) or None
    val, err = integrate.quad(g, a, b, points=pts, limit=500,
                              epsabs=1e-14, epsrel=1e-12)
    return val, err


def poisson_integral(rho, z: complex, tol: float = 1e-9) -> IntegralResult:
    r"""Poisson extension of a boundary density to the right half-plane.

    .. math:: P[\rho](x+iy) = \frac{1}{\pi}\int \frac{x\,\rho(\lambda)}{x^2+(y-\lambda)^2}d\lambda

    The substitution ``lam = y + x tan(theta)`` turns the kernel into the
    uniform measure on ``(-pi/2, pi/2)``.  The window ``|lam - y| < W`` is
    doubled until the class-based tail estimate falls below ``tol``; the
    estimate itself is added to the returned value.
    """
    if not isinstance(rho, BoundaryDensity):
        rho = BoundaryDensity(rho)
    z = complex(z)
    x, y = z.real, z.imag
    if not x > 0:
        raise DomainError(f"Poisson integral needs Re z > 0, got {z}")

    def g(theta):
        return float(np.real(rho(y + x * np.tan(theta))))

    p = rho.tail_exponent()
    pts = [np.arctan((b - y) / x) for b in (0.0, *rho.breakpoints)]
    W = max(32.0 * x, 64.0)
    prev = None
    while True:
        th = np.arctan(W / x)
        core, _ = _quad(g, -th, th, pts)
        core /= np.pi
        # mass of the Poisson kernel beyond |lam - y| = W, weighted by growth
        tail = 0.0
        for s in (1.0, -1.0):
            tail += x * float(np.real(rho(y + s * W))) / (np.pi * W * (1.0 - p))
        val = core + tail
        small = abs(tail) < tol * max(1.0, abs(val))
        stable = prev is not None and abs(val - prev) < tol * max(1.0, abs(val))
        if small or stable:
            return IntegralResult(val, tail, W)
        if W >= W_CAP:
            warnings.warn(f"Poisson tail {tail:.3g} above tolerance at W cap",
                          AccuracyWarning, stacklevel=2)
            return IntegralResult(val, tail, W, converged=False,
                                  notes=["window cap reached"])
        prev = val
        W *= 2.0


def plancherel_norm(F: Callable, tol: float = 1e-10, scale: float = 1.0,
                    points=()) -> IntegralResult:
    r"""Squared norm ``(1/2pi) int |F(i lam)|^2 d lam`` of a Hardy-space function.

    ``F`` is a callable of the complex variable and is evaluated at ``i lam``.
    The line is mapped onto ``(-pi/2, pi/2)`` by ``lam = scale tan(theta)``;
    an integrand decaying like ``lam^{-2}`` stays bounded under this map, so
    the window ``|lam| < W`` only needs to grow until the remaining tail,
    estimated as ``W |F(iW)|^2`` per side, is below ``tol``.
    """
    def g(theta):
        c = np.cos(theta)
        lam = scale * np.tan(theta)
        return float(abs(F(1j * lam)) ** 2) * scale / (c * c)

    pts = [np.arctan(b / scale) for b in points]
    W = 64.0 * scale
    prev = None
    while True:
        th = np.arctan(W / scale)
        core, _ = _quad(g, -th, th, pts)
        tail = W * (abs(F(1j * W)) ** 2 + abs(F(-1j * W)) ** 2)
        val = (core + tail) / (2 * np.pi)
        t = tail / (2 * np.pi)
        if t < tol * max(1.0, val) or (prev is not None and abs(val - prev) < tol * max(1.0, val)):
            return IntegralResult(val, t, W)
        if W >= W_CAP:
            return IntegralResult(val, t, W, converged=False,
                                  notes=["divergent or slowly decaying tail"])
        prev = val
        W *= 2.0


def bromwich_inverse(F: Callable, t: float, b: float = 1.0) -> complex:
    r"""Inverse Laplace transform along the vertical line ``Re z = b``.

    .. math:: f(t) = \frac{e^{bt}}{2\pi}\int_{-\infty}^{\infty} e^{iyt}F(b+iy)\,dy

    The line integral is folded onto ``y > 0`` and evaluated with QUADPACK's
    Fourier-integral routine (QAWF), which sums the oscillatory tail by
    extrapolation instead of truncating at a finite radius.
    """
    if not t > 0:
        raise DomainError(f"Bromwich inversion needs t > 0, got {t}")

    def even(y):
        return F(b + 1j * y) + F(b - 1j * y)

    def odd(y):
        return 1j * (F(b + 1j * y) - F(b - 1j * y))

    parts = []
    for fun, wt in ((even, "cos"), (odd, "sin")):
        for comp in (np.real, np.imag):
            v, _ = integrate.quad(lambda y: float(comp(fun(y))), 0.0, np.inf,
                                  weight=wt, wvar=t, limlst=200)
            parts.append(v)
    val = complex(parts[0] + parts[2], parts[1] + parts[3])
    return np.exp(b * t) * val / (2 * np.pi)
