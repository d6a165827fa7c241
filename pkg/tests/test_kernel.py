import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shiftpert.numerics import DomainError, Grid, GridFunction, eval_e_z, norm_sq
from shiftpert.profiles import ProfileFunction
from shiftpert.kernel import (PoleError, alpha_kernel, alpha_kernel_closed, build_kernel, closed_form_density,
                              cocycle_residuals, delayed_kernel_apply, exponential_kernel, kernel_from_q_r,
                              mobius_rank_one_update, p_from_q, q_from_density, q_from_p, q_from_profile,
                              rank_one_minors, schur_norm_estimate, xi_vector)


def test_exponential_kernel_matches_closed_form(e2_kernel, oracle):
    x = e2_kernel.grid.nodes
    exact = np.exp(-x[:, None] - 2 * x[None, :])
    assert np.max(np.abs(e2_kernel.values - exact)) < 1e-8
    assert abs(e2_kernel(1.0, 1.0) - oracle["k_e2_at_1_1"]) < 1e-14
    assert e2_kernel.meta["richardson"]


def test_closed_exponential_kernel_helper():
    g = Grid(5.0, 50)
    k = exponential_kernel(1.0, 2.0, g)
    x = g.nodes
    assert np.allclose(k.values, np.exp(-x[:, None] - 2 * x[None, :]))


def test_alpha_kernel_value_and_oddness(oracle):
    k = alpha_kernel(0.25, Grid(4.0, 64))
    assert abs(k(1.0, 1.0) - oracle["alpha_kernel_1_1"]) < 1e-15
    assert k.meta["schur_bound"] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        alpha_kernel(0.5, Grid(4.0, 64))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-0.45, 0.45), x=st.floats(0.01, 5), y=st.floats(0.01, 5))
def test_alpha_kernel_reflection(a, x, y):
    # replacing alpha by -alpha transposes the kernel and flips its sign
    assert alpha_kernel_closed(a)(x, y) == pytest.approx(-alpha_kernel_closed(-a)(y, x), rel=1e-12, abs=1e-300)


def test_schur_estimate_below_bound():
    k = alpha_kernel(-0.25, Grid(30.0, 600))
    assert schur_norm_estimate(k) <= k.meta["schur_bound"] + 1e-9


def test_q_from_profile_matches_mobius_closed_form():
    M = closed_form_density("mobius", a=1, b=2)
    q = q_from_profile(ProfileFunction.exponential(1.0, 2.0), Grid(10.0, 200))
    assert np.max(np.abs(q.q.values - M.q_closed(q.q.nodes))) < 1e-12
    assert q.q0 == 1.0


def test_p_q_round_trip():
    M = closed_form_density("mobius", a=1, b=2)
    q = q_from_density(M, Grid(10.0, 2000))
    back = q_from_p(p_from_q(q))
    assert np.max(np.abs(back.values - q.q.values)[5:-5]) < 5e-5


@pytest.mark.parametrize("z", [1.0, 1 + 1j, 2 + 3j])
def test_xi_vector_norm(z, oracle):
    # M(z) = z/(1+z): xi(y) = exp(-y)/z
    M = closed_form_density("mobius", a=0, b=1)
    xi = xi_vector(M, z, Grid(40.0, 4000))
    assert xi.laplace_check < 1e-4
    ref = {complex(*zz): v for zz, v in oracle["xi_norm_z_over_1pz"]}[complex(z)]
    assert norm_sq(xi.values) == pytest.approx(ref, rel=1e-4)


def test_xi_vector_rejects_bad_points():
    M = closed_form_density("mobius", a=0, b=1)
    with pytest.raises(DomainError):
        xi_vector(M, -1.0, Grid(4.0, 32))
    k0 = exponential_kernel(0.0, 1.0, Grid(4.0, 32))
    _, M1, _, _ = mobius_rank_one_update(k0, closed_form_density("constant", c=1.0), 1.0, 2.0)
    with pytest.raises(PoleError):
        xi_vector(M1, 1.0, Grid(4.0, 32))


def test_kernel_from_q_r_variants_agree():
    M = closed_form_density("mobius", a=1, b=2)
    g = Grid(10.0, 1000)
    q = GridFunction(g, M.q_closed(g.nodes))
    r = GridFunction(g, M.r_closed(g.nodes))
    k1 = kernel_from_q_r(q, r, 1)
    k2 = kernel_from_q_r(q, r, 2)
    X = k2.grid.nodes
    # both are second order in h; they agree to within the discretization error
    assert np.max(np.abs(k1.values - k2.values)) < 5e-4
    # same density as the profile e^{-2x}
    assert np.max(np.abs(k2.values - np.exp(-X[:, None] - 2 * X[None, :]))) < 1e-3
    with pytest.raises(ValueError):
        kernel_from_q_r(q, r, 3)


def test_delayed_kernel(oracle):
    f = eval_e_z(1, Grid(5.0, 100))
    out = delayed_kernel_apply(0.5, 1.0, 1.0, f)
    assert abs(out.values[0] - oracle["delayed_K1_e1_at_0"]) < 1e-14
    assert np.all(out.values[f.nodes >= 1.0] == 0)
    with pytest.raises(DomainError):
        delayed_kernel_apply(0.5, 0.0, 1.0, f)


def test_rank_one_update_is_rank_one():
    k0 = exponential_kernel(0.0, 1.0, Grid(4.0, 32))
    k1, M1, rb, qg = mobius_rank_one_update(k0, closed_form_density("constant", c=1.0), 1.0, 2.0)
    assert rank_one_minors(k1.values - k0.values).max() < 1e-10
    x = k0.grid.nodes
    # L r = 1/(z-1), L q = 1/(z+2)
    assert np.max(np.abs(rb.values - np.exp(x)) / np.exp(x)) < 1e-6
    assert np.max(np.abs(qg.values - np.exp(-2 * x))) < 1e-6
    assert M1(3.0) == pytest.approx(2 / 5)


def test_rank_one_minors_detect_rank_two(rng):
    D = rng.standard_normal((20, 20))
    assert rank_one_minors(D).max() > 1e-3
    u, v = rng.standard_normal(20), rng.standard_normal(20)
    assert rank_one_minors(np.outer(u, v)).max() < 1e-12


def test_cocycle_identity_exact(e2_kernel):
    res = cocycle_residuals(e2_kernel, [(0.5, 0.5, 0.5), (1.0, 2.0, 0.3)], exact=True)
    assert np.all(res < 1e-12)


def test_closed_density_rejects_unknown():
    with pytest.raises(DomainError):
        closed_form_density("gaussian")
    with pytest.raises(DomainError):
        closed_form_density("shifted-power", alpha=0.7)


def test_kernel_csv_round_trip(tmp_path):
    k = exponential_kernel(1.0, 2.0, Grid(2.0, 8))
    k.write(tmp_path / "k.csv", tmp_path / "k.json")
    data = np.loadtxt(tmp_path / "k.csv", delimiter=",", skiprows=1)
    assert np.allclose(data[:, 1:], k.values.real)


def test_profile_kernel_x_cut():
    g = Grid(8.0, 64)
    k = build_kernel(ProfileFunction.indicator(0, 1), None, g, x_cut=2.0)
    assert k.nrows == 17
    with pytest.raises(DomainError):
        k.row(3.0)
