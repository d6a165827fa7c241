import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shiftpert.numerics import DomainError, Grid, GridFunction, eval_e_z
from shiftpert.profiles import ProfileFunction
from shiftpert.transforms import (AccuracyWarning, BoundaryDensity, bromwich_inverse, laplace_transform,
                                  plancherel_norm, poisson_integral)


def test_laplace_closed_and_sampled(oracle):
    e1 = ProfileFunction.exponential(1, 1)
    assert abs(laplace_transform(e1, 1) - oracle["laplace_e1_1"]) < 1e-14
    ind = ProfileFunction.indicator(0, 1)
    assert abs(laplace_transform(ind, 3) - oracle["laplace_ind01_3"]) < 1e-14
    g = Grid(40.0, 8000)
    # trapezoid: error h^2 / 12 * 2 * 1 ~ 4.2e-6 at h = 0.005
    assert abs(laplace_transform(eval_e_z(1, g), 1) - 0.5) < 5e-6
    with pytest.raises(DomainError):
        laplace_transform(e1, -0.5)


@pytest.mark.parametrize("i", range(3))
def test_poisson_matches_brute_force(oracle, i):
    z, ref = oracle["poisson_rho1"][i]
    r = poisson_integral(BoundaryDensity(lambda l: 1 / (1 + l * l)), complex(*z))
    assert r.converged
    assert abs(r.value - ref) < 1e-6
    x, y = z
    assert abs(r.value - (1 + x) / ((1 + x) ** 2 + y ** 2)) < 1e-6


def test_poisson_linearity_example(oracle):
    r = poisson_integral(BoundaryDensity(lambda l: l * l / (1 + l * l)), 1.0)
    assert abs(r.value - oracle["poisson_rho2_at_1"]) < 1e-6


def test_poisson_requires_right_half_plane():
    with pytest.raises(DomainError):
        poisson_integral(lambda l: 1.0 + 0 * l, -1.0)


def test_poisson_divergent_density_warns():
    rho = BoundaryDensity(lambda l: np.abs(l) ** 1.5, "power", 1.5)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        r = poisson_integral(rho, 1.0)
    assert not r.converged or any(issubclass(x.category, AccuracyWarning) for x in w)


def test_plancherel(oracle):
    assert abs(plancherel_norm(lambda z: 1 / (1 + z)).value - oracle["plancherel_e1"]) < 1e-8
    v = plancherel_norm(lambda z: 1 / ((1 + z) * (2 + z))).value
    assert abs(v - oracle["plancherel_e1_minus_e2"]) < 1e-8


def test_plancherel_not_in_hardy_space():
    r = plancherel_norm(lambda z: 1 / np.sqrt(1 + z))
    assert not r.converged


def test_bromwich(oracle):
    assert abs(bromwich_inverse(lambda z: 1 / (z + 1), 1.0) - oracle["bromwich_1_over_z_plus_1"]) < 1e-4
    assert abs(bromwich_inverse(lambda z: 1 / z, 1.0) - oracle["bromwich_1_over_z"]) < 1e-4
    with pytest.raises(DomainError):
        bromwich_inverse(lambda z: 1 / z, 0.0)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.2, 5), t=st.floats(0.2, 3))
def test_bromwich_inverts_exponentials(a, t):
    v = bromwich_inverse(lambda z: 1 / (z + a), t, b=1.0)
    assert abs(v - np.exp(-a * t)) < 1e-5


@settings(max_examples=20, deadline=None)
@given(x=st.floats(0.1, 10), y=st.floats(-20, 20), c=st.floats(0.1, 5))
def test_poisson_reproduces_constants_and_is_monotone(x, y, c):
    r = poisson_integral(BoundaryDensity(lambda l: c + 0 * np.asarray(l, float)), complex(x, y))
    assert abs(r.value - c) < 1e-7 * c
    lo = poisson_integral(BoundaryDensity(lambda l: 1 / (1 + np.asarray(l, float) ** 2)), complex(x, y)).value
    hi = poisson_integral(BoundaryDensity(lambda l: 2 / (1 + np.asarray(l, float) ** 2)), complex(x, y)).value
    assert hi == pytest.approx(2 * lo, rel=1e-6)
