import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shiftpert.classify import (FAIL, INCONCLUSIVE, PASS, UnsupportedCaseError, a2_condition, a2_limit_constant,
                                asymptotic_fit, asymptotic_predict, circle_power_density, classify,
                                factorization_tests, growth_condition, hd2_criterion, hd2_tauberian_side,
                                outer_test, small_t_study, sobolev_condition, xi_norm_plancherel, xi_norm_poisson)
from shiftpert.kernel import PoleError, closed_form_density
from shiftpert.numerics import DomainError, Grid, InvalidParameterError
from shiftpert.profiles import ProfileFunction
from shiftpert.transforms import BoundaryDensity


@pytest.fixture(scope="module")
def z_over_1pz():
    return closed_form_density("mobius", a=0, b=1)


@pytest.fixture(scope="module")
def mobius12():
    return closed_form_density("mobius", a=1, b=2)


def test_xi_norm_two_ways(z_over_1pz, oracle):
    for zz, v in oracle["xi_norm_z_over_1pz"]:
        z = complex(*zz)
        assert xi_norm_poisson(z_over_1pz, z) == pytest.approx(v, rel=1e-9)
        assert xi_norm_plancherel(z_over_1pz, z) == pytest.approx(v, rel=1e-9)


def test_xi_norm_mobius(mobius12, oracle):
    assert xi_norm_poisson(mobius12, 1.0) == pytest.approx(oracle["xi_norm_mobius12_at_1"], rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(x=st.floats(0.2, 5), y=st.floats(-5, 5))
def test_xi_norm_methods_agree(mobius12, x, y):
    z = complex(x, y)
    assert xi_norm_poisson(mobius12, z) == pytest.approx(xi_norm_plancherel(mobius12, z), rel=1e-6, abs=1e-12)


def test_xi_norm_rejects_zero_of_M(z_over_1pz):
    with pytest.raises(DomainError):
        xi_norm_poisson(z_over_1pz, 0.0)
    M = closed_form_density("mobius", a=-1, b=2)
    with pytest.raises(PoleError):
        xi_norm_poisson(M, 1.0)


def test_hd2_integrals(z_over_1pz, oracle):
    rep = hd2_criterion(z_over_1pz, [1, 2, 4])
    for s, (x, v) in zip(rep.hd2_samples, oracle["hd2_z_over_1pz"]):
        assert s["x"] == x
        assert s["status"] == "converged"
        assert s["integral"] == pytest.approx(v, rel=1e-6)
    assert rep.verdicts["hd2_bound"].status == PASS
    assert rep.verdicts["normalized_growth"].status == INCONCLUSIVE
    with pytest.raises(InvalidParameterError):
        hd2_criterion(z_over_1pz, [0.0])


def test_tauberian_side(z_over_1pz, mobius12, oracle):
    for x, v in oracle["tauberian_e1"]:
        assert hd2_tauberian_side(z_over_1pz, x) == pytest.approx(v, rel=1e-6)
    for x, v in oracle["tauberian_e2"]:
        assert hd2_tauberian_side(mobius12, x) == pytest.approx(v, rel=1e-6)


def test_laplace_stieltjes_equals_tauberian_side(e2_sg, mobius12):
    # int exp(-2tx) d||K_t||^2 = (1/2pi) int ||xi_{x+iy}||^2 dy
    from shiftpert.semigroup import laplace_stieltjes
    for x in (2.0, 4.0):
        assert laplace_stieltjes(e2_sg, x) == pytest.approx(hd2_tauberian_side(mobius12, x), rel=1e-3)


def test_blaschke_verdicts(oracle):
    f = factorization_tests(zeros=lambda n: 2.0 ** -n * (1 + 1j * n))
    assert f["blaschke"].status == PASS
    assert f["blaschke"].evidence["sum_re"] == pytest.approx(oracle["blaschke_sum"], rel=1e-12)
    assert factorization_tests(zeros=lambda n: 1.0 / n)["blaschke"].status == INCONCLUSIVE
    assert factorization_tests(zeros=lambda n: 1.0)["blaschke"].status == FAIL
    fin = factorization_tests(zeros=[1 + 1j, 2.0])["blaschke"]
    assert fin.status == PASS and fin.evidence["sum_re"] == 3.0
    with pytest.raises(DomainError):
        factorization_tests(zeros=[-1.0])


def test_singular_component():
    assert factorization_tests()["singular"].status == PASS
    assert factorization_tests(singular=(1.0, ()))["singular"].status == FAIL
    atoms = factorization_tests(singular=(0.0, [(0.0, 1.0), (2.0, 0.5)]))["singular"]
    assert atoms.status == PASS and atoms.evidence["moment"] == pytest.approx(3.5)


def test_outer_test_smooth_log_modulus():
    rho = BoundaryDensity(lambda l: np.log(1 + np.asarray(l, float) ** 2) / (1 + np.asarray(l, float) ** 2))
    v = outer_test(rho, [2.0])
    assert v.status == PASS
    # Jensen: log of the Poisson mean dominates the Poisson mean of the log
    assert min(v.evidence["sup_E"]) >= 0


def test_a2_levels_approach_limit(oracle):
    for al, v in oracle["a2_limit"]:
        assert a2_limit_constant(al) == pytest.approx(v, rel=1e-12)
        r = a2_condition(circle_power_density(al), 6)
        lv = np.array(r["levels"])
        assert np.all(np.diff(lv) > 0)
        assert lv[-1] < v
        assert lv[-1] == pytest.approx(v, rel=2e-3)


def test_a2_fails_for_nonintegrable_weight():
    r = a2_condition(circle_power_density(0.5), 2)
    assert r["worst"] == math.inf


def test_sobolev_condition():
    assert sobolev_condition(lambda s: math.exp(-s * s)).status == PASS
    jump = sobolev_condition(lambda s: 1.0 if 0 < s < 1 else 0.0, singular=[0.0, 1.0])
    assert jump.status == FAIL
    assert jump.evidence["increment_ratio"] == pytest.approx(1.0, abs=1e-6)


def test_growth_condition(z_over_1pz):
    assert growth_condition(z_over_1pz).status == PASS
    slow = closed_form_density("mobius", a=0, b=1)
    # sqrt(x)|M(x)| increases for any bounded-below M; a decaying M fails
    decaying = closed_form_density("shifted-power", alpha=-0.4)
    assert growth_condition(decaying).status == PASS
    assert growth_condition(slow).evidence["sqrt_x_abs_M"][0] == pytest.approx(2 * 4 / 5)


def test_predicted_laws(oracle):
    law = asymptotic_predict(ProfileFunction.power(0.25, 0.25))
    assert law.case == "regularly-varying"
    assert law.constant == pytest.approx(oracle["power_law_constant"], rel=1e-12)
    assert law.exponent == 0.5
    assert law.self_check < 1e-8
    law = asymptotic_predict(ProfileFunction.log_power(1.0, 2.0))
    assert law.case == "slowly-varying"
    assert law.constant == pytest.approx(oracle["log_law_constant"], rel=1e-12)
    assert law.self_check < 1e-3
    law = asymptotic_predict(ProfileFunction.exponential(1.0, 1.0))
    assert law.case == "square-integrable" and law.constant == pytest.approx(0.5)
    with pytest.raises(UnsupportedCaseError):
        asymptotic_predict(ProfileFunction.zero())
    with pytest.raises(UnsupportedCaseError):
        asymptotic_predict(ProfileFunction.power(0.5))


def test_fit_recovers_synthetic_laws():
    t = np.geomspace(1e-4, 1e-3, 12)
    out = asymptotic_fit(t, 0.7 * t ** 0.6)
    assert out["exponent"] == pytest.approx(0.6, abs=1e-10)
    assert out["constant"] == pytest.approx(0.7, rel=1e-8)
    law = asymptotic_predict(ProfileFunction.log_power(1.0, 2.0))
    L = np.log(1 / t)
    out = asymptotic_fit(t, (1 / 3 + 0.2 / L) * L ** -3, law)
    assert out["constant"] == pytest.approx(1 / 3, rel=1e-8)
    assert out["correction"] == pytest.approx(0.2, rel=1e-6)
    with pytest.raises(InvalidParameterError):
        asymptotic_fit(t[:3], t[:3])
    with pytest.raises(InvalidParameterError):
        asymptotic_fit(t, 0 * t)


def test_small_t_study_exponential():
    s = small_t_study(ProfileFunction.exponential(1.0, 1.0), Grid(4.0, 512), 0.01, 0.1)
    assert s["fit"]["exponent"] == pytest.approx(1.0, abs=1e-6)
    assert s["fit"]["relative_deviation"] == pytest.approx(0.0, abs=1e-6)


def test_classify_report_is_json(mobius12):
    rep = classify(mobius12, phi=ProfileFunction.exponential(1.0, 2.0))
    data = json.loads(rep.to_json())
    assert data["verdicts"]["hd2_bound"]["status"] == PASS
    assert data["verdicts"]["growth"]["status"] == PASS
    assert data["asymptotic_fit"]["case"] == "square-integrable"
    assert "hd2_bound" in rep.summary_table()
