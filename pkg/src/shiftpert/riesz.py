"""Past/future geometry of the weighted boundary space
``G = L^2(R, |M(i lam)|^2 d lam / 2 pi)``: subspaces spanned by Fourier
transforms of functions supported on intervals, principal angles between
them, and the Hilbert-Schmidt norm of the skew minus the orthogonal
projection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .kernel import HalfDensity, half_density_from_profile
from .numerics import DomainError, Grid, InvalidParameterError
from .profiles import ProfileFunction

FLOOR = 1e-10
BUMP_POWER = 3          # (1 - u^2)^3: C^2 across the interval ends


class DirectSumError(ValueError):
    """Principal cosine numerically equal to one: the sum is not direct."""


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_TAIL_X, _TAIL_W = np.polynomial.legendre.leggauss(96)


@dataclass
class LambdaRule:
    """Quadrature nodes and weights on the whole line for ``(1/2pi) int ... d lam``.

    Composite Gauss-Legendre on ``[-W, W]`` with panels short enough to
    resolve ``exp(-i lam x)`` for ``|x| <= reach``, plus the tails
    ``|lam| > 4W`` mapped by ``lam = 4W / v`` onto ``(0, 1]``. ``window`` is
    ``W``, the range where finite-interval transforms are integrated directly.
    """

    nodes: np.ndarray
    weights: np.ndarray
    window: float

    @classmethod
    def build(cls, reach: float, m: int = 24, window: Optional[float] = None, scale: float = 1.0):
        reach = max(float(reach), 1.0)
        # finite-interval generators of degree m need |lam| well beyond m / reach
        W = 64.0 * reach * (m + 8) if window is None else float(window)
        # panel width: resolve exp(-i lam x) for |x| <= reach and the Laguerre
        # phase 2m arctan(lam / s), whose rate is 2 m s / (s^2 + lam^2)
        s = float(scale)
        wmax = min(0.5, np.pi / (4 * reach))
        # composite panels run to 4W; beyond W the bump transforms are asymptotic
        E = 4.0 * W
        edges = [0.0]
        while edges[-1] < E:
            l = edges[-1]
            edges.append(l + min(wmax, np.pi * (s * s + l * l) / (8 * max(m, 1) * s)))
        pos = np.array(edges)
        pos[-1] = E
        edges = np.concatenate([-pos[:0:-1], pos])
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * _GL_X).ravel()
        w = (half[:, None] * _GL_W).ravel()
        v = 0.5 * (_TAIL_X + 1)
        tv = 0.5 * _TAIL_W * E / v ** 2
        lam = np.concatenate([x, E / v, -E / v])
        wts = np.concatenate([w, tv, tv]) / (2 * np.pi)
        return cls(lam, wts, W)


def _interval(I):
    a, b = float(I[0]), float(I[1])
    if not a < b:
        raise InvalidParameterError(f"empty interval {I}")
    if math.isinf(a) and math.isinf(b):
        raise InvalidParameterError("the whole line is not a generating interval")
    return a, b


def _jacobi_bump(m: int, u: np.ndarray) -> np.ndarray:
    """``P_k^(q,q)(u) (1 - u^2)^(q/2)`` with ``q = 2 BUMP_POWER``, normalized in ``L^2(-1, 1)``.

    The Jacobi weight matches the squared bump, so the family is orthonormal
    and spans the same space as plain polynomials times the bump.
    """
    q = 2 * BUMP_POWER
    out = np.empty((m, u.size))
    bump = (1 - u * u) ** BUMP_POWER
    for k in range(m):
        lognorm = ((2 * q + 1) * math.log(2) - math.log(2 * k + 2 * q + 1)
                   + 2 * special.gammaln(k + q + 1) - special.gammaln(k + 1) - special.gammaln(k + 2 * q + 1))
        out[k] = special.eval_jacobi(k, q, q, u) * bump * math.exp(-0.5 * lognorm)
    return out


def _endpoint_derivatives(m: int, orders: Sequence[int]) -> tuple:
    """``d^j/du^j`` of the ``_jacobi_bump`` family at ``u = -1`` and ``u = 1``.

    Uses the closed forms for derivatives of Jacobi polynomials and their end
    values, combined with the bump by Leibniz' rule.
    """
    q = 2 * BUMP_POWER
    bump = np.polynomial.Polynomial([1.0, 0.0, -1.0]) ** BUMP_POWER
    jmax = max(orders)
    bd = {e: [bump.deriv(i)(e) if i else bump(e) for i in range(jmax + 1)] for e in (-1.0, 1.0)}
    lo = np.zeros((m, len(orders)))
    hi = np.zeros((m, len(orders)))
    for k in range(m):
        lognorm = ((2 * q + 1) * math.log(2) - math.log(2 * k + 2 * q + 1)
                   + 2 * special.gammaln(k + q + 1) - special.gammaln(k + 1) - special.gammaln(k + 2 * q + 1))
        nrm = math.exp(-0.5 * lognorm)
        # P^(r)(+-1) for r <= jmax
        pd = {1.0: [], -1.0: []}
        for r in range(jmax + 1):
            n = k - r
            if n < 0:
                pd[1.0].append(0.0)
                pd[-1.0].append(0.0)
                continue
            c = math.exp(special.gammaln(2 * q + k + 1 + r) - special.gammaln(2 * q + k + 1)) / 2 ** r
            end = special.binom(n + q + r, n)
            pd[1.0].append(c * end)
            pd[-1.0].append(c * end * (-1) ** n)
        for col, j in enumerate(orders):
            for e, dst in ((-1.0, lo), (1.0, hi)):
                dst[k, col] = nrm * sum(special.binom(j, i) * bd[e][i] * pd[e][j - i] for i in range(j + 1))
    return lo, hi


def generator_transforms(I, m: int, lam: np.ndarray, scale: float = 1.0,
                         window: Optional[float] = None) -> np.ndarray:
    """Fourier transforms ``int_I g_k(x) exp(-i lam x) dx`` of the generator family.

    Finite ``I = (a, b)``: ``g_k = P_k(u) (1 - u^2)^3`` with ``u`` the affine
    image of ``I`` on ``(-1, 1)`` and ``P_k`` the Jacobi polynomials that
    make the family orthonormal in ``L^2(-1, 1)`` (up to the factor ``h``).
    Half-lines ``(a, inf)`` and ``(-inf, b)``: Laguerre functions
    ``exp(-s y) L_k(2 s y)`` of the distance ``y`` to the finite end, with
    transform ``(s - i lam)^k / (s + i lam)^(k+1)`` times the end phase.
    For ``|lam| > window`` the finite-interval transforms come from the
    endpoint expansion obtained by integrating by parts.
    Returns an array of shape ``(m, len(lam))``.
    """
    a, b = _interval(I)
    lam = np.asarray(lam, float)
    out = np.empty((m, lam.size), dtype=complex)
    if math.isfinite(a) and math.isfinite(b):
        c, h = 0.5 * (a + b), 0.5 * (b - a)
        # transforms decay like |lam|^-(BUMP_POWER+1)
        inside = np.abs(lam) <= window if window is not None else np.ones(lam.size, bool)
        li = lam[inside]
        reach = h * (np.max(np.abs(li)) if li.size else 0.0)
        # Gauss-Legendre resolves exp(-i lam h u) only for nq comfortably above lam h
        nq = int(max(64, m + 2 * BUMP_POWER + 1.2 * reach + 40))
        u, w = np.polynomial.legendre.leggauss(nq)
        bump = (1 - u * u) ** BUMP_POWER
        P = _jacobi_bump(m, u) * (w * h)
        far = ~inside
        if far.any():
            orders = list(range(BUMP_POWER, BUMP_POWER + 5))
            lo, hi = _endpoint_derivatives(m, orders)
            lf = lam[far]
            ea, eb = np.exp(-1j * lf * a), np.exp(-1j * lf * b)
            acc = np.zeros((m, lf.size), complex)
            for col, j in enumerate(orders):
                fac = (1j * lf) ** (-(j + 1)) / h ** j
                acc += (lo[:, col:col + 1] * ea - hi[:, col:col + 1] * eb) * fac
            out[:, far] = acc
        for s0 in range(0, li.size, 8192):
            E = np.exp(-1j * np.outer(c + h * u, li[s0:s0 + 8192]))
            idx = np.nonzero(inside)[0][s0:s0 + 8192]
            out[:, idx] = P @ E
        return out
    s = float(scale)
    if math.isfinite(a):
        end, z = a, s + 1j * lam
        ratio = (s - 1j * lam) / z
    else:
        end, z = b, s - 1j * lam
        ratio = (s + 1j * lam) / z
    base = np.exp(-1j * lam * end) / z
    out[0] = base
    for k in range(1, m):
        out[k] = out[k - 1] * ratio
    return out * math.sqrt(2 * s)


@dataclass
class SubspaceBasis:
    """Generators of ``G(I)`` with their Gram matrix against ``nu``."""

    interval: tuple
    m: int
    transforms: np.ndarray
    gram: np.ndarray
    rule: LambdaRule
    dropped: int = 0
    eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self):
        herm = np.max(np.abs(self.gram - self.gram.conj().T))
        if herm > 1e-12 * max(1.0, np.max(np.abs(self.gram))):
            raise ValueError("Gram matrix is not Hermitian")

    def whitener(self, floor: float = FLOOR):
        """``G^(-1/2)`` on the well-conditioned eigenspace, and the number of dropped directions."""
        ev, V = np.linalg.eigh(self.gram)
        keep = ev > floor * ev.max()
        return V[:, keep] / np.sqrt(ev[keep]), int((~keep).sum())


def _weighted(M: HalfDensity, rule: LambdaRule) -> np.ndarray:
    rho = np.real(M.boundary(rule.nodes))
    if np.any(~np.isfinite(rho)) or np.any(rho < 0):
        raise DomainError("boundary density must be finite and nonnegative on the quadrature nodes")
    return rule.weights * rho


def _reach(*intervals) -> float:
    ends = [abs(v) for I in intervals for v in I if math.isfinite(v)]
    lens = [I[1] - I[0] for I in intervals if math.isfinite(I[1] - I[0])]
    return max(ends + lens + [1.0])


def build_basis(M: HalfDensity, I, m: int, rule: Optional[LambdaRule] = None,
                scale: float = 1.0) -> SubspaceBasis:
    """``m`` generators of ``G(I)`` and their ``nu``-Gram matrix."""
    if m < 1:
        raise InvalidParameterError("need at least one generator")
    I = _interval(I)
    rule = rule or LambdaRule.build(_reach(I), m, scale=scale)
    T = generator_transforms(I, m, rule.nodes, scale, rule.window * (1 + 1e-12))
    w = _weighted(M, rule)
    G = (T * w) @ T.conj().T
    G = 0.5 * (G + G.conj().T)
    ev = np.linalg.eigvalsh(G)
    dropped = int((ev <= FLOOR * ev.max()).sum())
    return SubspaceBasis(I, m, T, G, rule, dropped, ev)


@dataclass
class AngleSpectrum:
    """Cosines of the principal angles, descending."""

    cosines: np.ndarray
    dropped: tuple = (0, 0)

    def __post_init__(self):
        c = np.asarray(self.cosines, float)
        if c.size and c.max() >= 1 - FLOOR:
            raise DirectSumError(f"largest cosine {c.max():.12f} is numerically one")
        self.cosines = np.sort(c)[::-1]


def principal_angles(B1: SubspaceBasis, B2: SubspaceBasis, M: Optional[HalfDensity] = None) -> AngleSpectrum:
    """Singular values of the whitened cross-Gram of two bases on disjoint intervals."""
    (a1, b1), (a2, b2) = B1.interval, B2.interval
    if max(a1, a2) < min(b1, b2):
        raise InvalidParameterError("intervals overlap")
    if B1.rule is not B2.rule and not (np.array_equal(B1.rule.nodes, B2.rule.nodes)):
        raise InvalidParameterError("bases use different quadrature rules")
    if M is None:
        raise InvalidParameterError("the half-density is needed for the cross-Gram")
    w = _weighted(M, B1.rule)
    C = (B1.transforms * w) @ B2.transforms.conj().T
    W1, d1 = B1.whitener()
    W2, d2 = B2.whitener()
    s = np.linalg.svd(W1.conj().T @ C @ W2, compute_uv=False)
    return AngleSpectrum(np.clip(s, 0.0, None), (d1, d2))


def q_minus_p_hs(angles: AngleSpectrum) -> dict:
    """``||Q - P||_HS^2 = sum c^2 / (1 - c^2)`` and ``||P2 P1||_HS^2 = sum c^2``."""
    c2 = np.asarray(angles.cosines, float) ** 2
    return {"hs_sq": float(np.sum(c2 / (1 - c2))), "trace_c2": float(np.sum(c2))}


def subspace_hs(M: HalfDensity, t: float, m: int, rule: Optional[LambdaRule] = None) -> dict:
    """HS norm of ``Q - P`` on ``G(-t, inf) = G(0, inf) + G(-t, 0)`` with ``m`` generators each."""
    past, future = (-float(t), 0.0), (0.0, np.inf)
    rule = rule or LambdaRule.build(_reach(past), m)
    Bp = build_basis(M, past, m, rule)
    Bf = build_basis(M, future, m, rule)
    ang = principal_angles(Bp, Bf, M)
    out = q_minus_p_hs(ang)
    out.update(m=m, hs=math.sqrt(out["hs_sq"]), max_cosine=float(ang.cosines[0]) if ang.cosines.size else 0.0,
               dropped=list(ang.dropped))
    return out


@dataclass
class Comparison:
    t: float
    m_trace: list
    kernel_value: float
    relative_gap: float
    status: str = "ok"
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"t": self.t, "m_trace": self.m_trace, "kernel_value": self.kernel_value,
                "relative_gap": self.relative_gap, "status": self.status, "notes": self.notes}

    def to_json(self, path=None):
        s = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s + "\n")
        return s


def kernel_hs_value(phi: ProfileFunction, t: float, grid: Optional[Grid] = None) -> float:
    """``||K_t||_HS`` from the Volterra-built kernel of ``phi``."""
    from .kernel import build_kernel
    from .semigroup import PerturbedSemigroup, hs_norm

    if phi.form == "zero":
        return 0.0
    grid = grid or Grid(max(20.0, 4 * t), 512)
    k = build_kernel(phi, None, grid)
    return math.sqrt(hs_norm(PerturbedSemigroup(k), t))


def compare_with_kernel_hs(phi: ProfileFunction, t: float, ms: Sequence[int] = (8, 16, 24, 32),
                           grid: Optional[Grid] = None) -> Comparison:
    """Both sides of the HS equality between ``K_t`` and ``Q - P`` on ``G(-t, inf)``.

    The subspace side is reported for each ``m`` in ``ms``; the gap uses the
    largest ``m``.
    """
    if not phi.is_real:
        raise InvalidParameterError("the subspace side needs a real profile (conjugate symmetry)")
    if t <= 0:
        raise InvalidParameterError("t must be positive")
    M = half_density_from_profile(phi)
    kv = kernel_hs_value(phi, t, grid)
    rule = LambdaRule.build(_reach((-t, 0.0)), max(ms))
    trace, notes, status = [], [], "ok"
    for m in ms:
        try:
            r = subspace_hs(M, t, m, rule)
            trace.append([int(m), r["hs"]])
        except DirectSumError as e:
            notes.append(f"m={m}: {e}")
            status = "inconclusive"
    if trace:
        sv = trace[-1][1]
        gap = abs(sv - kv) / kv if kv > 0 else abs(sv - kv)
    else:
        gap = float("nan")
    return Comparison(float(t), trace, kv, float(gap), status, notes)
