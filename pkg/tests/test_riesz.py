import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shiftpert.kernel import closed_form_density
from shiftpert.numerics import InvalidParameterError
from shiftpert.profiles import ProfileFunction
from shiftpert.riesz import (AngleSpectrum, DirectSumError, LambdaRule, _endpoint_derivatives, _jacobi_bump,
                             build_basis, compare_with_kernel_hs, generator_transforms, principal_angles,
                             q_minus_p_hs, subspace_hs)


@pytest.fixture(scope="module")
def white():
    return closed_form_density("constant", c=1.0)


@pytest.fixture(scope="module")
def mobius12():
    return closed_form_density("mobius", a=1, b=2)


def test_jacobi_bump_family_is_orthonormal():
    u, w = np.polynomial.legendre.leggauss(120)
    g = _jacobi_bump(10, u)
    assert np.max(np.abs((g * w) @ g.T - np.eye(10))) < 1e-12


def test_endpoint_derivatives_match_polynomial_fit():
    m, orders = 6, [3, 4, 5]
    lo, hi = _endpoint_derivatives(m, orders)
    u = np.cos(np.linspace(0, np.pi, 200))
    g = _jacobi_bump(m, u)
    for k in range(m):
        p = np.polynomial.Chebyshev.fit(u, g[k], k + 6)
        for col, j in enumerate(orders):
            d = p.deriv(j)
            assert lo[k, col] == pytest.approx(d(-1.0), rel=1e-7, abs=1e-7)
            assert hi[k, col] == pytest.approx(d(1.0), rel=1e-7, abs=1e-7)


def test_lambda_rule_integrates_lorentzian():
    r = LambdaRule.build(1.0, 8)
    # (1/2pi) int dl / (1 + l^2) = 1/2
    assert np.sum(r.weights / (1 + r.nodes ** 2)) == pytest.approx(0.5, rel=1e-12)


def test_far_transforms_match_direct_quadrature():
    r = LambdaRule.build(1.0, 8)
    lam = np.array([1.01 * r.window, -1.5 * r.window])
    asym = generator_transforms((-1, 0), 8, lam, window=r.window)
    direct = generator_transforms((-1, 0), 8, lam, window=None)
    assert np.max(np.abs(asym - direct)) < 1e-7 * np.max(np.abs(direct))


def test_white_noise_grams(white):
    # finite interval: the generators are orthonormal up to the half-length h
    B = build_basis(white, (0, 1), 4)
    assert np.max(np.abs(B.gram - 0.5 * np.eye(4))) < 1e-12
    for I in ((0, np.inf), (-np.inf, 0)):
        assert np.max(np.abs(build_basis(white, I, 6).gram - np.eye(6))) < 1e-12


def test_past_gram_against_time_domain(mobius12, oracle):
    B = build_basis(mobius12, (-1, 0), 3)
    assert np.max(np.abs(B.gram - np.array(oracle["mobius12_past_gram"]))) < 1e-10
    assert B.dropped == 0


def test_gram_bounds_for_bounded_density(mobius12):
    # 1/4 <= rho <= 1 for (z+1)/(z+2): the Gram is squeezed between the white ones
    B = build_basis(mobius12, (0, np.inf), 8)
    ev = np.linalg.eigvalsh(B.gram)
    assert ev.min() >= 0.25 - 1e-10 and ev.max() <= 1 + 1e-10


def test_principal_angles_symmetric(mobius12):
    r = LambdaRule.build(1.0, 8)
    Bp = build_basis(mobius12, (-1, 0), 8, r)
    Bf = build_basis(mobius12, (0, np.inf), 8, r)
    a = principal_angles(Bp, Bf, mobius12).cosines
    b = principal_angles(Bf, Bp, mobius12).cosines
    assert np.allclose(a, b, atol=1e-12)
    assert np.all((a >= 0) & (a < 1))


def test_principal_angle_errors(mobius12, white):
    r = LambdaRule.build(1.0, 4)
    A = build_basis(white, (0, 1), 4, r)
    B = build_basis(white, (0.5, 2), 4, r)
    with pytest.raises(InvalidParameterError):
        principal_angles(A, B, white)
    C = build_basis(white, (1, np.inf), 4, LambdaRule.build(2.0, 4))
    with pytest.raises(InvalidParameterError):
        principal_angles(A, C, white)
    D = build_basis(white, (1, np.inf), 4, r)
    with pytest.raises(InvalidParameterError):
        principal_angles(A, D)
    with pytest.raises(DirectSumError):
        AngleSpectrum(np.array([0.3, 1.0]))
    with pytest.raises(InvalidParameterError):
        build_basis(white, (1, 1), 4)
    with pytest.raises(InvalidParameterError):
        build_basis(white, (-np.inf, np.inf), 4)


@settings(max_examples=25, deadline=None)
@given(c=st.lists(st.floats(0, 0.999), min_size=1, max_size=6))
def test_q_minus_p_formula(c):
    out = q_minus_p_hs(AngleSpectrum(np.array(c)))
    c2 = np.array(c) ** 2
    assert out["hs_sq"] == pytest.approx(np.sum(c2 / (1 - c2)), rel=1e-12)
    assert out["hs_sq"] >= out["trace_c2"] - 1e-15


def test_white_noise_has_no_angles(white):
    assert subspace_hs(white, 1.0, 8)["hs"] < 1e-6


def test_subspace_side_increases_towards_kernel_value(mobius12, oracle):
    v8 = subspace_hs(mobius12, 1.0, 8)["hs"]
    v16 = subspace_hs(mobius12, 1.0, 16)["hs"]
    assert v8 < v16 < oracle["kernel_hs_e2_t1"]


def test_comparison_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        compare_with_kernel_hs(ProfileFunction.exponential(1j, 2.0), 1.0)
    with pytest.raises(InvalidParameterError):
        compare_with_kernel_hs(ProfileFunction.exponential(1.0, 2.0), 0.0)
