"""Grid posterior, variational functional, search and baselines."""

import math

import numpy as np
import pytest

from gibbsbvs import (CLASSIFICATION_RHO, Dataset, PriorSpec, derive_risk_spec)
from gibbsbvs.generators import GeneratorSpec, generate
from gibbsbvs.oracle import (best_sparse_rule, exact_grid_posterior,
                             gibbs_functional, logistic_mle_baseline,
                             no_selection_experiment, screen_columns,
                             variational_check)
from gibbsbvs.risk import population_risk_analytic
from gibbsbvs.rng import Stream


def _tiny():
    gen = GeneratorSpec("misspecified-logistic", n=20, lam=0.125)
    data = generate(gen, seed=20250909)
    risk = derive_risk_spec(CLASSIFICATION_RHO, psi=2.0,
                            sigma_n=math.sqrt(math.log(20) / 20))
    prior = PriorSpec(lam=0.5, rbar=2, v=1.0, k=2)
    return data, risk, prior


def test_grid_posterior_normalizes_and_prior_masses_sum():
    data, risk, prior = _tiny()
    gp = exact_grid_posterior(data, risk, prior, grid=(3.0, 21))
    assert gp.probs.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.exp(gp.log_prior_mass).sum() == pytest.approx(1.0, abs=1e-10)
    assert gp.n_atoms == 44  # 2 sign atoms + 2 * 21 gridded-intercept atoms


def test_grid_posterior_guard():
    data, risk, prior = _tiny()
    with pytest.raises(ValueError):
        exact_grid_posterior(data, risk, prior, grid=(3.0, 55))
    big_prior = PriorSpec(lam=0.5, rbar=2, v=1.0, k=40)
    feats = np.zeros((4, 40))
    feats[:, 0] = 0.2
    wide = Dataset(labels=np.array([0, 1, 0, 1]), features=feats)
    with pytest.raises(ValueError):
        exact_grid_posterior(wide, risk, big_prior, grid=(3.0, 5))


def test_grid_posterior_flat_likelihood_returns_prior():
    _, risk, prior = _tiny()
    flat = Dataset(labels=np.array([1]), features=np.array([[0.0, 0.0]]),
                   provenance="flat")
    gp = exact_grid_posterior(flat, risk, prior, grid=(3.0, 21))
    assert 0.5 * np.abs(gp.probs - gp.prior_probs()).sum() <= 1e-2


def test_grid_posterior_psi_to_zero_returns_prior():
    data, _, prior = _tiny()
    rk = derive_risk_spec(CLASSIFICATION_RHO, psi=1e-8, sigma_n=0.4)
    gp = exact_grid_posterior(data, rk, prior, grid=(3.0, 21))
    assert 0.5 * np.abs(gp.probs - gp.prior_probs()).sum() <= 1e-3


def test_grid_posterior_mode_location():
    data, risk, prior = _tiny()
    gp = exact_grid_posterior(data, risk, prior, grid=(3.0, 21))
    i = gp.mode()
    assert gp.atom_beta1[i] == 1.0
    assert gp.patterns[gp.atom_pattern[i]] == (1,)
    center = gp.centers[gp.atom_cells[i, 0]]
    assert -0.9 <= center <= -0.3  # the risk-optimal intercept bracket


def test_variational_functional_identities():
    data, risk, prior = _tiny()
    gp = exact_grid_posterior(data, risk, prior, grid=(3.0, 21))
    f_gibbs = gibbs_functional(gp, gp.probs, risk.psi)
    # free-energy identity: F(gibbs) = -psi^-1 ln sum pi exp(-n psi R_n)
    lw = gp.log_prior_mass - gp.n_psi * gp.risk_values
    top = lw.max()
    log_z = top + math.log(np.exp(lw - top).sum())
    assert f_gibbs == pytest.approx(-log_z / risk.psi, abs=1e-9)
    # self-comparison is equality, the prior scores no better
    assert gibbs_functional(gp, gp.probs, risk.psi) == pytest.approx(f_gibbs)
    assert gibbs_functional(gp, gp.prior_probs(), risk.psi) >= f_gibbs - 1e-12


def test_variational_check_passes():
    data, risk, prior = _tiny()
    gp = exact_grid_posterior(data, risk, prior, grid=(3.0, 21))
    rep = variational_check(gp, risk.psi, n_perturbations=100, seed=1)
    assert rep["ok"] and rep["n_checked"] == 101


def test_best_sparse_rule_on_indicator_grid():
    gen = GeneratorSpec("indicator-grid", n=40, k=6)
    data = generate(gen, seed=1)
    beta, risk_val = best_sparse_rule(data, budget=1, grid=(1.0, 3))
    assert risk_val == 0.0
    assert list(beta) == [1.0, 0, 0, 0, 0, 0]  # sparsest perfect rule wins ties


def test_best_sparse_rule_matches_paper_value_analytically():
    gen = GeneratorSpec("misspecified-logistic", n=0, lam=0.125)
    data = generate(gen.with_size(50), seed=1)
    beta, risk_val = best_sparse_rule(
        data, budget=1, grid=(0.9, 4),
        eval_fn=lambda b: population_risk_analytic(b, gen))
    assert risk_val == pytest.approx(0.125)


def test_best_sparse_rule_realizable_sparse_truth():
    gen = GeneratorSpec("sparse-linear", n=150, k=8, support=2, coef_scale=1.0,
                        noise=0.0, truth_seed=7)
    data = generate(gen, seed=7)
    beta, risk_val = best_sparse_rule(data, budget=2, grid=(1.5, 7))
    assert risk_val == 0.0


def test_best_sparse_rule_monotone_in_budget():
    gen = GeneratorSpec("sparse-linear", n=120, k=7, support=3, coef_scale=1.0,
                        noise=0.05, truth_seed=3)
    data = generate(gen, seed=3)
    risks = [best_sparse_rule(data, budget=s, grid=(1.5, 5))[1]
             for s in (0, 1, 2, 3)]
    assert all(a >= b for a, b in zip(risks, risks[1:]))


def test_best_sparse_rule_guard():
    gen = GeneratorSpec("sparse-linear", n=20, k=200, support=2, coef_scale=1.0,
                        noise=0.0, truth_seed=1)
    data = generate(gen, seed=1)
    with pytest.raises(ValueError, match="guard"):
        best_sparse_rule(data, budget=3, grid=(1.0, 9))


def test_screen_columns_finds_signal():
    gen = GeneratorSpec("sparse-linear", n=300, k=40, support=3, coef_scale=2.0,
                        noise=0.05, truth_seed=5)
    data = generate(gen, seed=5)
    from gibbsbvs.generators import sparse_linear_truth
    truth_cols = set(np.flatnonzero(sparse_linear_truth(gen)[1:]).tolist())
    screened = set((screen_columns(data, 8) - 1).tolist())
    assert truth_cols <= screened


def test_mle_on_misspecified_data_hits_kl_limit():
    gen = GeneratorSpec("misspecified-logistic", n=10_000, lam=0.125)
    data = generate(gen, seed=11)
    beta, converged = logistic_mle_baseline(data)
    assert converged
    # fitted p(y=1|x) ~ 2 lambda = 0.25 at every support point
    for x in (-1.0, 0.0, 1.0):
        p = 1.0 / (1.0 + math.exp(-(beta[0] * x + beta[1])))
        assert abs(p - 0.25) < 0.05
    assert population_risk_analytic(beta, gen) == pytest.approx(0.25)


def test_mle_separable_data_training_error_zero():
    s = Stream.from_seed(41)
    x = np.concatenate([s.uniforms(40) * 0.4 + 0.5, -(s.uniforms(40) * 0.4 + 0.5)])
    feats = np.column_stack([x, np.ones(80)])
    data = Dataset(labels=(x > 0).astype(np.int64), features=feats)
    beta, _ = logistic_mle_baseline(data)
    err = np.mean((feats @ beta > 0) != data.labels)
    assert err == 0.0


def test_mle_zero_information_risk_half():
    s = Stream.from_seed(42)
    n = 4000
    feats = np.column_stack([2 * s.uniforms(n) - 1, np.ones(n)])
    labels = (s.uniforms(n) < 0.5).astype(np.int64)
    data = Dataset(labels=labels, features=feats)
    beta, _ = logistic_mle_baseline(data)
    fresh_x = np.column_stack([2 * s.uniforms(50_000) - 1, np.ones(50_000)])
    fresh_y = (s.uniforms(50_000) < 0.5).astype(np.int64)
    risk = np.mean((fresh_x @ beta > 0) != fresh_y)
    assert abs(risk - 0.5) < 0.02


def test_no_selection_bound_high_dimensional():
    rep = no_selection_experiment(1000, 20, seed=1, draws=100_000)
    assert rep["bound"] == pytest.approx(0.49)
    assert rep["estimate"] >= 0.49 - 3 * rep["se"]
    assert rep["meets_bound"]


def test_no_selection_bound_degenerates_at_k_near_n():
    rep = no_selection_experiment(21, 20, seed=2, draws=50_000)
    assert rep["bound"] == pytest.approx(0.5 / 21)
    assert rep["estimate"] >= rep["bound"] - 3 * rep["se"]
    with pytest.raises(ValueError):
        no_selection_experiment(20, 20, seed=3)
