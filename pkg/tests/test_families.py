"""Sparse-family membership predicates and the inclusion property checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsbvs.families import (FamilySpec, check_inclusions, is_member,
                               witness_flat_head, witness_geometric_tail)

N = 10 ** 6
DELTA = math.log(N) ** 2 / math.sqrt(N)


def _spec(family, **kw):
    base = dict(n=N, delta_n=DELTA, c=2.0, c_prime=1.0, c_dprime=0.5,
                m=2.0, q=25.0)
    base.update(kw)
    return FamilySpec(family=family, **base)


def test_anchor_only_rule_in_every_family():
    beta = np.concatenate([[1.0], np.zeros(40)])
    for fam in ("Hb", "H1", "H2", "H3", "Hm", "HE"):
        assert is_member(beta, _spec(fam))


def test_requires_standardized_anchor():
    with pytest.raises(ValueError):
        is_member(np.array([0.5, 0.1]), _spec("Hb"))


def test_flat_head_witness_in_hb_not_h3():
    beta = witness_flat_head(_spec("Hb"))
    assert is_member(beta, _spec("Hb"))
    assert not is_member(beta, _spec("H3"))


def test_geometric_tail_witness_in_h3_not_hb():
    beta = witness_geometric_tail(_spec("Hb"))
    assert is_member(beta, _spec("H3"))
    assert not is_member(beta, _spec("Hb"))


def test_tail_bounds_bite():
    # a rule whose tail decays too slowly for HE at the required rate
    vals = 0.01 * np.arange(1, 200, dtype=float) ** -1.05
    beta = np.concatenate([[1.0], vals])
    assert is_member(beta, _spec("H3"))
    assert not is_member(beta, _spec("HE", q=5.0, c_dprime=1.0))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_membership_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    tail = rng.uniform(-0.5, 0.5, size=25)
    beta = np.concatenate([[1.0], tail])
    perm = np.concatenate([[1.0], rng.permutation(tail)])
    for fam in ("Hb", "H1", "H2", "H3", "Hm", "HE"):
        spec = _spec(fam, q=3.0)
        assert is_member(beta, spec) == is_member(perm, spec)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_shrinking_preserves_membership(seed):
    rng = np.random.default_rng(seed)
    tail = rng.uniform(-0.8, 0.8, size=30)
    beta = np.concatenate([[1.0], tail])
    shrunk = beta.copy()
    j = rng.integers(1, 31)
    shrunk[j] *= rng.uniform(0.0, 1.0)
    for fam in ("Hb", "H2", "H3", "Hm", "HE", "H1"):
        spec = _spec(fam, q=3.0)
        if is_member(beta, spec):
            assert is_member(shrunk, spec)


def test_check_inclusions_clean():
    rep = check_inclusions(trials=600, seed=123)
    assert rep["violations"] == 0
    # the check must not be vacuous: each smaller family needs members
    for pair, row in rep["pairs"].items():
        assert row["members"] > 0, pair
