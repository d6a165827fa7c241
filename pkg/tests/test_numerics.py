import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shiftpert.numerics import (DomainError, Grid, GridFunction, GridMismatchError, InvalidParameterError,
                                bilinear_pairing, c2_bump, centered_diff, eval_e_z, graded, inner_product,
                                integrate, integrate_samples, make_grid, norm, norm_sq, probe_family)


def test_grid_nodes_and_weights():
    g = Grid(2.0, 4)
    assert np.allclose(g.nodes, [0, 0.5, 1, 1.5, 2])
    assert np.allclose(g.weights, [0.25, 0.5, 0.5, 0.5, 0.25])
    assert g.is_uniform and g.step == 0.5
    gg = make_grid(1.0, 4, graded(2))
    assert np.allclose(gg.nodes, [0, 1 / 16, 1 / 4, 9 / 16, 1])
    assert not gg.is_uniform
    assert gg.to_dict() == {"x_max": 1.0, "n": 4, "scheme": "graded", "gamma": 2.0}
    assert make_grid(1.0, 4, "graded").gamma == 3.0
    assert make_grid(1.0, 4, 1.5).gamma == 1.5


@pytest.mark.parametrize("args", [(0.0, 4), (-1.0, 4), (np.inf, 4), (1.0, 1), (1.0, 2.5)])
def test_grid_rejects_bad_parameters(args):
    with pytest.raises(InvalidParameterError):
        Grid(*args)


def test_grid_rejects_bad_scheme():
    with pytest.raises(InvalidParameterError):
        Grid(1.0, 4, "chebyshev")
    with pytest.raises(InvalidParameterError):
        Grid(1.0, 4, "graded", 0.5)


def test_inner_products_match_closed_forms(oracle):
    g = Grid(20.0, 20000)
    e1, e2 = eval_e_z(1, g), eval_e_z(2, g)
    # plain trapezoid: error h^2/12 [f'] ~ 1.7e-7 here
    assert abs(inner_product(e1, e1) - oracle["ip_e1_e1_20"]) < 2e-7
    assert abs(inner_product(e1, e2) - oracle["ip_e1_e2_20"]) < 3e-7
    # the Richardson combination reaches 1e-8 on a much coarser grid
    g2 = Grid(20.0, 2048)
    for p, key in ((2, "ip_e1_e1_20"), (3, "ip_e1_e2_20")):
        v = integrate_samples(np.exp(-p * g2.nodes), g2, richardson=True)
        assert abs(v - oracle[key]) < 1e-8


def test_e_z_values(oracle):
    g = Grid(4.0, 4)
    assert abs(eval_e_z(2, g).values[1] - oracle["e_z_2_at_1"]) < 1e-15
    with pytest.raises(DomainError):
        eval_e_z(-1.0, g)
    with pytest.raises(DomainError):
        eval_e_z(1j, g)


def test_grid_mismatch():
    f = GridFunction.zeros(Grid(1.0, 4))
    g = GridFunction.zeros(Grid(1.0, 8))
    for op in (lambda: f + g, lambda: f - g, lambda: f * g, lambda: inner_product(f, g),
               lambda: bilinear_pairing(f, g)):
        with pytest.raises(GridMismatchError):
            op()


def test_gridfunction_is_immutable_and_interpolates():
    g = Grid(1.0, 2)
    f = GridFunction(g, [0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        f.values[0] = 3
    assert f(0.25) == pytest.approx(0.5)
    assert f(2.0) == 0 and f(-1.0) == 0
    with pytest.raises(InvalidParameterError):
        GridFunction(g, [1.0, 2.0])


def test_power_singularity_first_cell():
    g = Grid(1.0, 1000)
    v = np.full(g.n + 1, np.inf)
    v[1:] = g.nodes[1:] ** -0.5
    assert abs(integrate_samples(v, g) - 2.0) < 5e-3


def test_richardson_needs_even_n():
    with pytest.raises(ValueError):
        integrate_samples(np.ones(4), Grid(1.0, 3), richardson=True)


def test_probe_family_is_seeded():
    g = Grid(5.0, 64)
    a = probe_family(g, 3)
    b = probe_family(g, 3)
    c = probe_family(g, 4)
    assert len(a) == 5
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    assert not np.array_equal(a[3].values, c[3].values)


def test_c2_bump_support_and_smoothness():
    x = np.linspace(-2, 2, 4001)
    b = c2_bump(x, 0.0, 1.0)
    assert b[np.abs(x) >= 1].max() == 0 and b.max() == 1
    d = centered_diff(GridFunction(Grid(1.0, 1000), c2_bump(np.linspace(0, 1, 1001), 0.5, 0.25)))
    assert abs(d.values[500]) < 1e-12


# --- properties -------------------------------------------------------------

coef = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(a=coef, b=coef, seed=st.integers(0, 1000))
def test_inner_product_sesquilinear(a, b, seed):
    g = Grid(3.0, 32)
    rng = np.random.default_rng(seed)
    f1, f2, h = (GridFunction(g, rng.normal(size=33) + 1j * rng.normal(size=33)) for _ in range(3))
    lhs = inner_product(a * f1 + b * f2, h)
    rhs = a * inner_product(f1, h) + b * inner_product(f2, h)
    assert abs(lhs - rhs) <= 1e-9 * (1 + abs(lhs))
    assert abs(inner_product(h, f1) - np.conj(inner_product(f1, h))) < 1e-12
    assert norm_sq(h) == pytest.approx(inner_product(h, h).real)
    assert norm(h) >= 0


@settings(max_examples=30, deadline=None)
@given(x_max=st.floats(0.5, 30), n=st.integers(2, 200))
def test_trapezoid_exact_for_linear(x_max, n):
    g = Grid(x_max, n)
    f = GridFunction.from_callable(g, lambda x: 2 - 3 * x)
    assert integrate(f) == pytest.approx(2 * x_max - 1.5 * x_max ** 2, rel=1e-10, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(gamma=st.floats(1, 6), n=st.integers(2, 200))
def test_graded_nodes_monotone_and_weights_sum(gamma, n):
    g = Grid(3.0, n, "graded", gamma)
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[0] == 0 and g.nodes[-1] == 3.0
    assert g.weights.sum() == pytest.approx(3.0)
