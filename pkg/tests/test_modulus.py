import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calderon_dini.modulus import (
    DomainError,
    ModulusSpec,
    ThetaWeight,
    dini_integral,
    eval_modulus,
    eval_theta,
    eval_tilde_omega,
    fit_theta_exponent,
    square_dini_constant,
    theta_lower_bound_constant,
)


def test_log_power_direct_formula():
    assert eval_modulus(ModulusSpec("log-power", 2.0), math.exp(-10)) == pytest.approx(0.01, rel=1e-14)


@pytest.mark.parametrize("alpha", [1.2, 2.0, 3.5])
def test_value_at_cap(alpha):
    spec = ModulusSpec("log-power", alpha)
    assert eval_modulus(spec, 0.5) == pytest.approx(math.log(2) ** -alpha, rel=1e-14)
    # constant beyond the cap
    assert eval_modulus(spec, 7.0) == pytest.approx(math.log(2) ** -alpha, rel=1e-14)


def test_integrated_log_power():
    assert eval_modulus(ModulusSpec("integrated-log-power", 2.0), math.exp(-10)) == pytest.approx(0.1, rel=1e-14)


def test_zero_at_origin_and_negative_rejected():
    assert eval_modulus(ModulusSpec(), 0.0) == 0.0
    with pytest.raises(DomainError):
        eval_modulus(ModulusSpec(), -1e-3)


@pytest.mark.parametrize("kind,exp", [("log-power", 2.0), ("integrated-log-power", 2.0), ("holder", 0.5)])
def test_monotone(kind, exp):
    r = np.linspace(0, 3, 2001)
    v = eval_modulus(ModulusSpec(kind, exp), r)
    assert np.all(np.diff(v) >= 0)


def test_bad_specs():
    with pytest.raises(DomainError):
        ModulusSpec("nope")
    with pytest.raises(DomainError):
        ModulusSpec("integrated-log-power", 1.0)
    with pytest.raises(DomainError):
        ModulusSpec("holder", 1.5)


def test_tilde_omega_branches():
    spec = ModulusSpec("log-power", 1.2)
    assert eval_tilde_omega(spec, math.exp(10)) == pytest.approx(10**1.2, rel=1e-13)
    assert eval_tilde_omega(spec, 0.5) == eval_modulus(spec, 0.5)
    assert eval_tilde_omega(spec, math.exp(-10)) == pytest.approx(10**-1.2, rel=1e-13)
    with pytest.raises(DomainError):
        eval_tilde_omega(spec, 0.0)


@given(st.floats(min_value=1e-6, max_value=1e6))
@settings(max_examples=60, deadline=None)
def test_tilde_omega_reciprocal(r):
    spec = ModulusSpec("log-power", 1.4)
    assert eval_tilde_omega(spec, r) * eval_tilde_omega(spec, 1 / r) == pytest.approx(1.0, rel=1e-12) or r == 1.0


def test_dini_integral_oracle():
    # mpmath quad of |log r|^-2 / r over [0.01, 0.5]
    assert dini_integral(ModulusSpec("log-power", 2.0), 0.01) == pytest.approx(1.22554779993734, rel=1e-10)


def test_theta_zero_below_one():
    w = ThetaWeight(ModulusSpec("log-power", 1.2))
    assert eval_theta(w, 0.7) == 0.0
    assert eval_theta(w, 1.0) == 0.0
    assert w(np.array([0.2, 0.9]))[0] == 0.0


# frozen from an independent mpmath evaluation of the defining integral
THETA_ORACLE = {
    1.2: [(2, 0.2876117122186), (10, 5.21552048121541), (100, 53.1152919944648), (1e4, 558.748311482038)],
    1.4: [(2, 0.248391512493989), (10, 6.44391455916029), (100, 87.3897557175833), (1e4, 1214.86891758868)],
}


@pytest.mark.parametrize("beta", [1.2, 1.4])
def test_theta_against_oracle(beta):
    w = ThetaWeight(ModulusSpec("log-power", beta))
    for r, ref in THETA_ORACLE[beta]:
        assert eval_theta(w, r) == pytest.approx(ref, rel=1e-8)


def test_theta_table_matches_scalar():
    w = ThetaWeight(ModulusSpec("log-power", 1.2))
    r = np.array([1.5, 3.0, 37.0, 800.0])
    ref = np.array([eval_theta(w, x) for x in r])
    assert np.allclose(w(r), ref, rtol=1e-5)


def test_theta_asymptote_log_power():
    w = ThetaWeight(ModulusSpec("log-power", 1.5))
    assert eval_theta(w, math.exp(10)) == pytest.approx(2500.0, rel=0.05)
    assert float(w.asymptote(math.exp(10))) == pytest.approx(2500.0)


def test_theta_holder_growth():
    w = ThetaWeight(ModulusSpec("holder", 0.5))
    ratios = [eval_theta(w, r) / r for r in (1e2, 1e4, 1e6)]
    assert all(x > 0 for x in ratios)
    assert ratios[-1] == pytest.approx(ratios[-2], rel=1e-4)


def test_theta_lower_bound_positive():
    w = ThetaWeight(ModulusSpec("log-power", 1.2))
    assert theta_lower_bound_constant(w, np.geomspace(2, 1e6, 25)) > 0


def test_square_dini_oracle():
    # t = log|log r| substitution in mpmath; tails have closed forms
    assert square_dini_constant(2.0, 1.2) == pytest.approx(15.7283916481158, rel=1e-9)
    assert square_dini_constant(2.0, 1.4) == pytest.approx(19.490940829863, rel=1e-9)


@pytest.mark.parametrize("beta", [1.6, 1.0])
def test_square_dini_domain(beta):
    with pytest.raises(DomainError):
        square_dini_constant(2.0, beta)


def test_fit_recovers_exponent():
    w = ThetaWeight(ModulusSpec("log-power", 1.2))
    k = 2.0 ** np.arange(2, 8)
    dev = 0.7 * np.array([eval_theta(w, x) for x in k]) ** -0.4
    a, log_c, rms = fit_theta_exponent(w, k, dev)
    assert a == pytest.approx(0.4, rel=1e-10)
    assert log_c == pytest.approx(math.log(0.7), rel=1e-10)
    assert rms < 1e-12
