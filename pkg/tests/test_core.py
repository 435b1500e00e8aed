"""Domain records, derived risk quantities, and the condition checkers."""

import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsbvs import (CLASSIFICATION_RHO, Coefficients, Dataset, ModelIndicator,
                      PriorSpec, auto_prior_spec, default_delta,
                      derive_risk_spec, validate_conditions)


def test_classification_matrix_q_h():
    spec = derive_risk_spec(CLASSIFICATION_RHO, psi=1.0, sigma_n=0.1)
    assert spec.q == 2.0
    assert spec.h == 0.5


def test_profit_matrix_q_h():
    # mail-out decision: cost c=1, net income g=100
    rho = [[0.0, 1.0], [0.0, -99.0]]
    spec = derive_risk_spec(rho, psi=1.0, sigma_n=0.1)
    assert spec.q == pytest.approx(100.0)
    assert spec.h == pytest.approx(0.01)


@pytest.mark.parametrize("psi", [0.1, 0.5, 1.0, 2.0, 7.3])
def test_classification_p0_p1_complementary(psi):
    spec = derive_risk_spec(CLASSIFICATION_RHO, psi=psi, sigma_n=0.1)
    assert spec.p1 == pytest.approx(math.exp(psi) / (1 + math.exp(psi)), abs=1e-14)
    assert spec.p0 + spec.p1 == pytest.approx(1.0, abs=1e-12)


def test_p0_below_h_below_p1_over_grid():
    for h in np.arange(0.1, 0.95, 0.1):
        for q in (0.5, 1.0, 2.0, 10.0):
            rho = [[0.0, h * q], [0.0, -q * (1 - h)]]
            for psi in (0.1, 1.0, 5.0):
                spec = derive_risk_spec(rho, psi=psi, sigma_n=0.1)
                assert spec.h == pytest.approx(h)
                assert spec.q == pytest.approx(q)
                assert spec.p0 < spec.h < spec.p1


@settings(max_examples=50, deadline=None)
@given(c=st.floats(-50.0, 50.0), psi=st.floats(0.05, 5.0))
def test_risk_spec_invariant_under_constant_shift(c, psi):
    base = derive_risk_spec(CLASSIFICATION_RHO, psi=psi, sigma_n=0.2)
    shifted = derive_risk_spec(np.array(CLASSIFICATION_RHO) + c, psi=psi, sigma_n=0.2)
    assert shifted.q == pytest.approx(base.q, abs=1e-12)
    assert shifted.h == pytest.approx(base.h, abs=1e-12)
    assert shifted.p0 == pytest.approx(base.p0, abs=1e-12)
    assert shifted.p1 == pytest.approx(base.p1, abs=1e-12)


def test_derive_risk_spec_rejects_bad_inputs():
    with pytest.raises(ValueError):
        derive_risk_spec([[1.0, 1.0], [1.0, 0.0]], psi=1.0, sigma_n=0.1)
    with pytest.raises(ValueError):
        derive_risk_spec([[0.0, 1.0], [0.5, 0.5]], psi=1.0, sigma_n=0.1)
    with pytest.raises(ValueError):
        derive_risk_spec(CLASSIFICATION_RHO, psi=0.0, sigma_n=0.1)
    with pytest.raises(ValueError):
        derive_risk_spec(CLASSIFICATION_RHO, psi=1.0, sigma_n=-0.5)


def test_dataset_invariants():
    data = Dataset(labels=np.array([0, 1]), features=np.array([[0.5, 1.0], [-1.0, 0.0]]))
    assert data.n == 2 and data.k == 2
    assert not data.features.flags.writeable
    with pytest.raises(ValueError):
        Dataset(labels=np.array([0, 2]), features=np.zeros((2, 2)))
    with pytest.raises(ValueError, match="0'"):
        Dataset(labels=np.array([0, 1]), features=np.array([[1.5, 0.0], [0.0, 0.0]]))


def test_indicator_and_coefficients():
    ind = ModelIndicator.from_active(5, [2, 4])
    assert ind.size == 3
    assert list(ind.active) == [2, 4]
    with pytest.raises(ValueError):
        ModelIndicator(np.array([False, True, False]))
    coeffs = Coefficients(beta1=-1.0, active=np.array([0.3, -0.2]))
    assert coeffs.matches(ind)
    with pytest.raises(ValueError):
        Coefficients(beta1=0.5, active=np.zeros(1))


def test_prior_spec_validation():
    with pytest.raises(ValueError):
        PriorSpec(lam=0.0, rbar=2, v=1.0, k=5)
    with pytest.raises(ValueError):
        PriorSpec(lam=0.2, rbar=0, v=1.0, k=5)
    with pytest.raises(ValueError):
        PriorSpec(lam=0.2, rbar=6, v=1.0, k=5)
    spec = PriorSpec(lam=0.2, rbar=3, v=1.0, k=5)
    assert spec.max_active == 2


def test_auto_prior_sits_inside_the_window():
    prior = auto_prior_spec(400, 2000)
    vn = 400 * default_delta(400) ** 2 / math.log(400) ** 2
    assert prior.rbar == int(2 * vn)
    assert prior.lam * prior.k == pytest.approx(prior.rbar / 2)


def _report(n=100, k=1000, sigma_n=None, delta_n=0.5, v=1.0, lam=None, rbar=None):
    feats = np.zeros((n, k))
    feats[:, 0] = 0.5
    data = Dataset(labels=np.zeros(n, dtype=np.int64) + (np.arange(n) % 2),
                   features=feats)
    prior = PriorSpec(lam=lam if lam is not None else 5.0 / k,
                      rbar=rbar if rbar is not None else 10, v=v, k=k)
    risk = derive_risk_spec(CLASSIFICATION_RHO, psi=1.0,
                            sigma_n=sigma_n if sigma_n else math.sqrt(math.log(n) / n))
    return validate_conditions(data, prior, risk, delta_n=delta_n)


def test_conditions_pass_in_regime():
    rep = _report()
    assert rep.entry("zero_prime").status == "pass"
    assert rep.entry("one_prime").status == "pass"  # 0.4605 < 0.5 < 1
    assert rep.entry("three_prime").status == "pass"
    assert not rep.blocking


def test_default_delta_at_small_n_warns_one_prime():
    # n = 100: n^{-1/2} (ln n)^2 = 2.12 > 1, outside the rate window
    rep = _report(delta_n=default_delta(100))
    assert rep.entry("one_prime").status == "warn"


def test_sigma_lower_edge_warning():
    rep = _report(sigma_n=10.0)
    e = rep.entry("sigma")
    assert e.status == "warn"
    assert "4.66" in e.message


def test_zero_prime_hard_failure_blocks():
    bad = SimpleNamespace(labels=np.array([0, 1]), n=2, k=2,
                          features=np.array([[1.5, 0.0], [0.0, 0.0]]),
                          declares_bounded_anchor_density=True)
    prior = PriorSpec(lam=0.2, rbar=2, v=1.0, k=2)
    risk = derive_risk_spec(CLASSIFICATION_RHO, psi=1.0, sigma_n=0.3)
    rep = validate_conditions(bad, prior, risk, delta_n=0.5)
    assert rep.entry("zero_prime").status == "fail"
    assert rep.blocking


def test_v_bound_hard_failure():
    rep = _report(v=500.0)
    assert rep.entry("V").status == "fail"
    assert rep.blocking


def test_k_le_n_warns_three_prime():
    rep = _report(n=100, k=50, rbar=10)
    assert rep.entry("three_prime").status == "warn"


def test_condition_report_serializes():
    rep = _report()
    obj = rep.to_json_obj()
    assert set(obj) == {"zero_prime", "zero_double_prime", "one_prime",
                        "three_prime", "sigma", "V", "r_delta", "delta_n"}
    assert obj["zero_prime"]["status"] == "pass"
    assert obj["delta_n"] == rep.delta_n
