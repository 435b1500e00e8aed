"""Generators: frozen frequencies, determinism, standardization, CSV ingestion."""

import math

import numpy as np
import pytest

from gibbsbvs import CLASSIFICATION_RHO, derive_risk_spec
from gibbsbvs.families import FamilySpec, is_member
from gibbsbvs.generators import (GeneratorSpec, finite_support,
                                 gen_indicator_grid, gen_misspecified_logistic,
                                 gen_sparse_linear, generate, ingest_csv,
                                 sparse_linear_truth)
from gibbsbvs.risk import empirical_risk_unsmoothed

CLS = derive_risk_spec(CLASSIFICATION_RHO, psi=1.0, sigma_n=0.1)


def test_misspec_frequencies_and_labels():
    lam, n = 0.125, 400_000
    data = gen_misspecified_logistic(lam, n, seed=1)
    x = data.features[:, 0]
    se = 3 * math.sqrt(lam * (1 - lam) / n)
    assert abs((x == -1).mean() - lam) <= se
    assert abs((x == 1).mean() - lam) <= se
    assert np.array_equal(data.labels, (x != 0).astype(np.int64))
    assert np.all(data.features[:, 1] == 1.0)
    assert not data.declares_bounded_anchor_density


def test_misspec_best_rule_empirical_risk():
    data = gen_misspecified_logistic(0.125, 1_000_000, seed=2)
    est = empirical_risk_unsmoothed(np.array([1.0, -0.7]), data, CLS)
    assert abs(est - 0.125) <= 3 * math.sqrt(0.125 * 0.875 / data.n)


def test_misspec_lambda_range():
    with pytest.raises(ValueError):
        gen_misspecified_logistic(0.3, 10, seed=1)


def test_indicator_grid_one_hot_and_perfect_anchor():
    data = gen_indicator_grid(7, 500, seed=3)
    assert np.all(data.features.sum(axis=1) == 1.0)
    assert np.all((data.features == 0) | (data.features == 1))
    beta = np.zeros(7)
    beta[0] = 1.0
    assert empirical_risk_unsmoothed(beta, data, CLS) == 0.0
    # anchor column equals the label by construction
    assert np.array_equal(data.features[:, 0].astype(np.int64), data.labels)


def test_sparse_linear_noise_free_truth_is_perfect():
    data, beta = gen_sparse_linear(10, 300, support=3, coef_scale=1.5,
                                   noise=0.0, seed=4)
    assert empirical_risk_unsmoothed(beta, data, CLS) == 0.0


def test_sparse_linear_noise_rate_is_bayes_risk():
    data, beta = gen_sparse_linear(6, 200_000, support=2, coef_scale=1.0,
                                   noise=0.1, seed=5)
    est = empirical_risk_unsmoothed(beta, data, CLS)
    assert abs(est - 0.1) <= 3 * math.sqrt(0.1 * 0.9 / data.n)


def test_sparse_linear_truth_in_hb_when_small():
    n = 10 ** 6
    delta = math.log(n) ** 2 / math.sqrt(n)
    _, beta = gen_sparse_linear(50, 10, support=4, coef_scale=1.5,
                                noise=0.0, seed=6)
    spec = FamilySpec(family="Hb", n=n, delta_n=delta, c=2.0)
    assert is_member(beta, spec)  # 4 <= v_n ~ 191 and 1.5 <= C
    tight = FamilySpec(family="Hb", n=n, delta_n=delta, c=1.0)
    assert not is_member(beta, tight)  # coefficient magnitude above C


def test_truth_shared_across_sizes_and_seeds():
    spec = GeneratorSpec("sparse-linear", n=100, k=20, support=3,
                         coef_scale=2.0, noise=0.1, truth_seed=9)
    b1 = sparse_linear_truth(spec)
    b2 = sparse_linear_truth(spec.with_size(5000))
    assert np.array_equal(b1, b2)
    d1 = generate(spec, seed=1)
    d2 = generate(spec, seed=2)
    assert not np.array_equal(d1.features, d2.features)


def test_generators_deterministic():
    a = gen_indicator_grid(5, 100, seed=11).features
    b = gen_indicator_grid(5, 100, seed=11).features
    assert np.array_equal(a, b)


def test_all_generators_standardized():
    for data in (gen_misspecified_logistic(0.2, 500, seed=1),
                 gen_indicator_grid(9, 500, seed=1),
                 gen_sparse_linear(8, 500, 2, 1.0, 0.2, seed=1)[0]):
        assert np.max(np.abs(data.features)) <= 1.0


def test_finite_support_misspec():
    w, f, y = finite_support(GeneratorSpec("misspecified-logistic", lam=0.125))
    assert w.sum() == pytest.approx(1.0)
    assert list(y) == [1, 0, 1]
    assert np.array_equal(f[:, 0], [-1.0, 0.0, 1.0])


def test_csv_ingestion(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("a,b,label,c\n2,7,0,5\n4,7,1,5\n6,7,0,5\n", encoding="utf-8")
    data = ingest_csv(p, "label")
    # column a ({2,4,6}) maps to {-1,0,1}; constant columns map to zero
    assert np.array_equal(data.features[:, 0], [-1.0, 0.0, 1.0])
    assert np.all(data.features[:, 1] == 0.0)
    assert np.all(data.features[:, 2] == 0.0)
    assert list(data.labels) == [0, 1, 0]
    assert np.max(np.abs(data.features)) <= 1.0
    assert "a:[2,6]" in data.provenance


def test_csv_anchor_override(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("a,b,label\n1,10,0\n2,20,1\n3,40,1\n", encoding="utf-8")
    data = ingest_csv(p, "label", anchor_column="b")
    np.testing.assert_allclose(data.features[:, 0], [-1.0, -1.0 / 3.0, 1.0],
                               atol=1e-15)


def test_csv_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(ValueError):
        ingest_csv(empty, "label")
    bad = tmp_path / "bad.csv"
    bad.write_text("a,label\nx,0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="non-numeric"):
        ingest_csv(bad, "label")
    nb = tmp_path / "nb.csv"
    nb.write_text("a,label\n1,2\n2,0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="binary"):
        ingest_csv(nb, "label")
