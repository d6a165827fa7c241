"""Acceptance criteria, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL`` line with its evidence (shown
without ``-s``).  A clause that cannot hold is marked ``xfail(strict=True)``
and prints FAIL.
"""

import time

import numpy as np
import pytest

from shiftpert.classify import (a2_condition, a2_limit_constant, circle_power_density, hd2_criterion,
                                hd2_tauberian_side, small_t_study, xi_norm_plancherel, xi_norm_poisson)
from shiftpert.kernel import (alpha_kernel, build_kernel, closed_form_density, exponential_kernel,
                              mobius_rank_one_update, rank_one_minors)
from shiftpert.numerics import Grid, eval_e_z
from shiftpert.profiles import ProfileFunction
from shiftpert.riesz import compare_with_kernel_hs, subspace_hs
from shiftpert.semigroup import (PerturbedSemigroup, hs_norm, hs_truncated, laplace_stieltjes,
                                 semigroup_residual, verify_C1)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


def test_criterion_01_exponential_kernel(report):
    t0 = time.perf_counter()
    k = build_kernel(ProfileFunction.exponential(1.0, 2.0), None, Grid(20.0, 512))
    dt = time.perf_counter() - t0
    x = k.grid.nodes
    r, c = x[:k.nrows] <= 4, x <= 4
    err = np.max(np.abs(k.values[np.ix_(r, c)] - np.exp(-x[:k.nrows][r, None] - 2 * x[None, c])))
    assert report(1, err < 1e-6 and dt < 10, f"max err {err:.2e} on [0,4]^2, {dt:.2f} s")


def test_criterion_02_cocycle(report):
    g = Grid(20.0, 512)
    sg = PerturbedSemigroup(build_kernel(ProfileFunction.exponential(1.0, 2.0), None, g))
    r_exp = semigroup_residual(sg, 0.5, 0.5, eval_e_z(1, g))
    # alpha = 1/4 at n = 256 and 512; s = t = 0.5 are nodes of both grids
    ra = [semigroup_residual(PerturbedSemigroup(alpha_kernel(0.25, Grid(8.0, n))), 0.5, 0.5,
                             eval_e_z(1, Grid(8.0, n))) for n in (256, 512)]
    ratio = ra[0] / ra[1]
    ok = r_exp < 1e-6 and ra[0] < 5e-4 and 3.5 <= ratio <= 4.5
    assert report(2, ok, f"exponential {r_exp:.2e}, alpha n=256 {ra[0]:.2e}, refinement ratio {ratio:.3f}")


def test_criterion_03_isometry(report):
    g = Grid(20.0, 512)
    worst = 0.0
    for phi in (ProfileFunction.exponential(1.0, 1.0), ProfileFunction.exponential(1.0, 2.0),
                ProfileFunction.indicator(0.0, 1.0)):
        sg = PerturbedSemigroup(build_kernel(phi, None, g))
        for t in (0.25, 0.5, 1.0):
            worst = max(worst, verify_C1(sg, t, seed=0)["residual"])
    assert report(3, worst < 1e-4, f"worst residual {worst:.2e} over 3 profiles x 3 times x 25 pairs")


def test_criterion_04_hs_laws(report, e1_sg, e2_sg):
    ts = np.linspace(0.1, 2.0, 20)
    r1 = max(abs(hs_norm(e1_sg, t) / (t / 2) - 1) for t in ts)
    r2 = max(abs(hs_norm(e2_sg, t) / ((1 - np.exp(-2 * t)) / 8) - 1) for t in ts)
    assert report(4, r1 < 1e-3 and r2 < 1e-3, f"relative errors {r1:.2e} (e^-x), {r2:.2e} (e^-2x)")


def test_criterion_05_xi_norms(report):
    M = closed_form_density("mobius", a=0, b=1)
    errs = []
    for z in (1.0, 1 + 1j, 2 + 3j):
        exact = 1 / (2 * abs(z) ** 2)
        errs += [abs(xi_norm_poisson(M, z) / exact - 1), abs(xi_norm_plancherel(M, z) / exact - 1)]
    assert report(5, max(errs) < 1e-4, f"worst relative error {max(errs):.2e}")


def test_criterion_06_tauberian(report, e1_sg, e2_sg):
    cases = [(e1_sg, closed_form_density("mobius", a=0, b=1), lambda x: 1 / (4 * x)),
             (e2_sg, closed_form_density("mobius", a=1, b=2), lambda x: 1 / (8 * (x + 1)))]
    worst = 0.0
    for sg, M, exact in cases:
        for x in (2.0, 4.0):
            ls, tb = laplace_stieltjes(sg, x), hd2_tauberian_side(M, x)
            worst = max(worst, abs(ls / tb - 1), abs(ls / exact(x) - 1), abs(tb / exact(x) - 1))
    assert report(6, worst < 0.02, f"worst relative gap {worst:.2e}")


def test_criterion_07_dichotomy(report):
    zero = np.max(np.abs(alpha_kernel(0.0, Grid(8.0, 64)).values))
    sg = PerturbedSemigroup(alpha_kernel(0.25, Grid(20.0, 512)))
    mass = [hs_truncated(sg, 2.0 ** -j, 1.0) for j in range(6, 13)]
    slopes = np.diff(mass) / np.log(2)
    spread = np.max(np.abs(slopes / slopes.mean() - 1))
    ev = hd2_criterion(closed_form_density("shifted-power", alpha=0.25), [1, 2, 4, 8]).verdicts["normalized_growth"]
    growth = ev.evidence["fitted_slope"]
    ok = zero == 0 and slopes.min() > 0 and spread <= 0.1 and growth > 0
    assert report(7, ok, f"alpha=0 max |k| {zero:g}; log-slopes {slopes.min():.4f}..{slopes.max():.4f} "
                         f"(spread {spread:.1%}); hd2 slope in x {growth:.3f}")


def test_criterion_08_subspace_geometry(report):
    c = compare_with_kernel_hs(ProfileFunction.exponential(1.0, 2.0), 1.0, [24, 32])
    trace = dict(c.m_trace)
    g24, g32 = (abs(trace[m] / 0.3288 - 1) for m in (24, 32))
    ctrl_sub = subspace_hs(closed_form_density("constant", c=1.0), 1.0, 24)["hs"]
    ctrl_ker = np.sqrt(hs_norm(PerturbedSemigroup(exponential_kernel(0.0, 1.0, Grid(8.0, 64))), 1.0))
    ok = g24 < 0.1 and g32 < g24 and ctrl_sub < 1e-6 and ctrl_ker < 1e-6
    assert report(8, ok, f"kernel {c.kernel_value:.5f}; m=24 {trace[24]:.5f} ({g24:.1%}), "
                         f"m=32 {trace[32]:.5f} ({g32:.1%}); M=1 control {ctrl_sub:.1e} / {ctrl_ker:.1e}")


def test_criterion_09_asymptotic_laws(report):
    e = small_t_study(ProfileFunction.exponential(1.0, 1.0), Grid(4.0, 512), 0.01, 0.1)["fit"]
    p = small_t_study(ProfileFunction.power(0.25, 0.25), Grid(8.0, 1024, "graded", 4.0), 1e-6, 1e-5)["fit"]
    lg = small_t_study(ProfileFunction.log_power(1.0, 2.0), Grid(np.exp(-1), 1024, "graded", 12.0), 1e-12)["fit"]
    ok = abs(e["exponent"] - 1) <= 0.02 and abs(p["exponent"] - 0.5) <= 0.05 and abs(lg["relative_deviation"]) <= 0.15
    assert report(9, ok, f"exponents {e['exponent']:.4f} (e^-x), {p['exponent']:.4f} (power 1/4); "
                         f"log-law constant {lg['constant']:.5f} vs 1/3 ({lg['relative_deviation']:+.1%})")


def _a2_levels():
    return {al: np.array(a2_condition(circle_power_density(al), 8)["levels"]) for al in (0.25, 0.49)}


def test_criterion_10_bounded_and_monotone():
    lv = _a2_levels()
    q = lv[0.25]
    assert np.isfinite(q).all() and abs(q[-1] / q[-2] - 1) < 1e-3
    assert q[-1] == pytest.approx(a2_limit_constant(0.25), rel=1e-3)
    assert np.all(np.diff(lv[0.49]) > 0)


@pytest.mark.xfail(strict=True, reason="|theta|^(-2 alpha) is an A2 weight for alpha < 1/2: at alpha = 0.49 the "
                                       "dyadic constants increase to the finite limit 25.2525 and cannot explode")
def test_criterion_10_a2(report):
    lv = _a2_levels()
    q, w = lv[0.25], lv[0.49]
    inc = np.diff(w)
    # explosion: increments that do not shrink geometrically
    explodes = bool(np.all(inc > 0) and inc[-1] / inc[-2] >= 0.85)
    stable = abs(q[-1] / q[-2] - 1) < 1e-3
    assert report(10, stable and explodes,
                  f"alpha=1/4 worst {q[-1]:.5f} (J-stable {stable}); alpha=0.49 levels {w[0]:.3f}..{w[-1]:.4f}, "
                  f"increment ratio {inc[-1] / inc[-2]:.3f}, limit {a2_limit_constant(0.49):.4f}: "
                  "monotone but bounded, explosion clause not attainable")


def test_criterion_11_rank_one_update(report):
    g = Grid(10.0, 200)
    k0 = exponential_kernel(0.0, 1.0, g)
    k1, M1, _, _ = mobius_rank_one_update(k0, closed_form_density("constant", c=1.0), 0.0, 1.0)
    D = k1.values - k0.values
    minor = rank_one_minors(D, 100).max() / np.max(np.abs(D)) ** 2
    ref = build_kernel(closed_form_density("mobius", a=0, b=1).profile, None, g)
    n = min(ref.nrows, k1.nrows)
    gap = np.max(np.abs(ref.values[:n] - k1.values[:n]))
    ok = minor < 1e-8 and gap < 1e-5 and M1(2.0) == pytest.approx(2 / 3)
    assert report(11, ok, f"scaled minors {minor:.1e}; gap to z/(1+z) kernel {gap:.1e}")
