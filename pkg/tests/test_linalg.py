"""SPD factorization route against numpy's dense linear algebra."""

import math

import numpy as np
import pytest

from gibbsbvs import Dataset, ModelIndicator
from gibbsbvs.linalg import SpdFactor, build_sgamma, log_det_ratio_term, spd_solve
from gibbsbvs.rng import Stream


def _data(feats):
    feats = np.asarray(feats, dtype=float)
    return Dataset(labels=np.ones(feats.shape[0], dtype=np.int64),
                   features=feats, provenance="linalg")


def test_empty_model_gives_dimension_zero_factor():
    data = _data([[0.5, 0.1], [0.2, -0.3]])
    f = build_sgamma(data, ModelIndicator.from_active(2, []), sigma=0.5, v=1.0)
    assert f.dim == 0 and f.logdet == 0.0
    assert spd_solve(f, np.zeros(0)).shape == (0,)


def test_zero_columns_give_scaled_identity():
    data = _data([[0.5, 0.0, 0.0, 0.0]] * 3)
    f = build_sgamma(data, ModelIndicator.from_active(4, [1, 2, 3]),
                     sigma=1.0, v=1.0)
    assert f.dim == 3
    assert f.logdet == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(f.lower, np.eye(3), atol=1e-14)


def test_hand_computed_gram():
    feats = np.array([[0.0, 1.0, 0.0],
                      [0.0, 0.5, 1.0],
                      [0.0, 0.0, -1.0]])
    data = _data(feats)
    f = build_sgamma(data, ModelIndicator.from_active(3, [1, 2]), sigma=1.0, v=2.0)
    s_exact = np.array([[1.25, 0.5], [0.5, 2.0]]) + 0.5 * np.eye(2)
    np.testing.assert_allclose(f.lower @ f.lower.T, s_exact, atol=1e-12)


def test_solve_identity_and_residual():
    rng = Stream.from_seed(10)
    a = rng.normals(16).reshape(4, 4)
    s = a @ a.T + 4.0 * np.eye(4)
    lo = np.linalg.cholesky(s)
    f = SpdFactor(dim=4, lower=lo, logdet=float(np.linalg.slogdet(s)[1]))
    rhs = rng.normals(4)
    x = spd_solve(f, rhs)
    assert np.max(np.abs(s @ x - rhs)) <= 1e-9
    eye_f = SpdFactor(dim=2, lower=np.eye(2), logdet=0.0)
    np.testing.assert_allclose(spd_solve(eye_f, np.array([3.0, -1.0])),
                               [3.0, -1.0])


def test_solve_dimension_mismatch():
    f = SpdFactor(dim=2, lower=np.eye(2), logdet=0.0)
    with pytest.raises(ValueError):
        spd_solve(f, np.zeros(3))


def test_logdet_matches_eigen_sum():
    rng = Stream.from_seed(11)
    for d in (1, 3, 7, 20):
        a = rng.normals(d * d).reshape(d, d)
        s = a @ a.T + d * np.eye(d)
        lo = np.linalg.cholesky(s)
        logdet_factor = 2.0 * float(np.sum(np.log(np.diag(lo))))
        eig = float(np.sum(np.log(np.linalg.eigvalsh(s))))
        assert logdet_factor == pytest.approx(eig, abs=1e-8)


def test_log_det_ratio_scalar_case():
    # single column with sum of squares 4, sigma = 1, v = 1:
    # -0.5 ln det[I + X'X v] = -0.5 ln 5
    feats = np.array([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
    data = _data(feats)
    f = build_sgamma(data, ModelIndicator.from_active(2, [1]), sigma=1.0, v=1.0)
    assert log_det_ratio_term(f, sigma=1.0, v=1.0) == pytest.approx(
        -0.5 * math.log(5.0), abs=1e-12)


def test_log_det_ratio_zero_for_zero_columns():
    data = _data([[0.5, 0.0], [0.1, 0.0]])
    f = build_sgamma(data, ModelIndicator.from_active(2, [1]), sigma=0.7, v=1.3)
    assert log_det_ratio_term(f, sigma=0.7, v=1.3) == pytest.approx(0.0, abs=1e-12)


def test_log_det_ratio_matches_direct_determinant():
    rng = Stream.from_seed(12)
    n, d = 6, 3
    x = rng.normals(n * d).reshape(n, d) * 0.15
    feats = np.zeros((n, d + 1))
    feats[:, 0] = 0.2
    feats[:, 1:] = x
    data = _data(feats)
    sigma, v = 0.4, 1.7
    f = build_sgamma(data, ModelIndicator.from_active(d + 1, list(range(1, d + 1))),
                     sigma=sigma, v=v)
    direct = -0.5 * math.log(np.linalg.det(np.eye(d) + (v / sigma ** 2) * x.T @ x))
    assert log_det_ratio_term(f, sigma=sigma, v=v) == pytest.approx(direct, abs=1e-9)


def test_quadratic_form_permutation_invariant():
    rng = Stream.from_seed(13)
    n, d = 8, 4
    x = rng.normals(n * d).reshape(n, d) * 0.2
    feats = np.zeros((n, d + 1))
    feats[:, 1:] = x
    data = _data(feats)
    z = rng.normals(n)
    cols = np.arange(1, d + 1)
    base = None
    for perm in ([0, 1, 2, 3], [3, 1, 0, 2], [2, 3, 1, 0]):
        xg = data.features[:, cols[perm]]
        s = xg.T @ xg + 0.25 * np.eye(d)
        qf = float(z @ xg @ np.linalg.solve(s, xg.T @ z))
        if base is None:
            base = qf
        assert qf == pytest.approx(base, abs=1e-9)


def test_non_finite_entries_rejected():
    with pytest.raises(ValueError):
        from gibbsbvs.linalg import _factor
        _factor(np.array([[np.inf, 0.0], [0.0, 1.0]]))
