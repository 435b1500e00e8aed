"""Sparse rule families: membership predicates and inclusion property checks.

A family constrains the sorted magnitudes of the non-anchor coefficients
b_(1) >= b_(2) >= ... of an assembled rule with |beta_1| = 1. Throughout,
v_n = n * delta_n^2 / (ln n)^2 (kept real-valued, as defined); head sums run
over integer j <= v_n and tails over j > v_n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .rng import ORACLE, Stream

__all__ = ["FamilySpec", "is_member", "check_inclusions",
           "witness_flat_head", "witness_geometric_tail"]

FAMILIES = ("Hb", "H1", "H2", "H3", "Hm", "HE")


@dataclass(frozen=True)
class FamilySpec:
    """One family with its constants and the ambient (n, delta_n)."""

    family: str
    n: int
    delta_n: float
    c: float = 1.0
    c_prime: float = 1.0
    c_dprime: float = 0.5
    m: float = 2.0
    q: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if min(self.c, self.c_prime, self.c_dprime, self.q) <= 0.0:
            raise ValueError("family constants must be positive")
        if self.family == "Hm" and self.m <= 0.0:
            raise ValueError("Hm needs m > 0")
        if not (self.n > 1 and self.delta_n > 0.0):
            raise ValueError("ambient n > 1 and delta_n > 0 required")

    @property
    def v_n(self) -> float:
        return self.n * self.delta_n ** 2 / math.log(self.n) ** 2


def _sorted_tail_sums(beta_rest: np.ndarray):
    mags = np.sort(np.abs(beta_rest))[::-1]
    # suffix[r] = sum of magnitudes ranked strictly below r (i.e. the tail > r)
    suffix = np.concatenate([np.cumsum(mags[::-1])[::-1], [0.0]])
    return mags, suffix


def is_member(beta: np.ndarray, spec: FamilySpec) -> bool:
    """Evaluate the family's defining inequalities on an assembled rule."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.ndim != 1 or beta.shape[0] < 1 or abs(beta[0]) != 1.0:
        raise ValueError("beta must be assembled with |beta_1| = 1")
    mags, suffix = _sorted_tail_sums(beta[1:])
    length = mags.shape[0]
    vn = spec.v_n
    logn = math.log(spec.n)
    head_n = min(int(math.floor(vn)), length)
    tail_after_vn = suffix[head_n] if head_n < length else 0.0
    tail_budget = spec.c_prime * spec.delta_n / logn

    fam = spec.family
    if fam == "Hb":
        return (int(np.count_nonzero(mags)) <= vn
                and (length == 0 or mags[0] <= spec.c))
    if fam == "H1":
        head_sq = float(np.dot(mags[:head_n], mags[:head_n]))
        return (head_sq <= spec.c ** 2 * spec.n * spec.delta_n ** 2 / logn
                and tail_after_vn <= tail_budget)
    if fam == "H2":
        head_sup = mags[0] if head_n > 0 else 0.0
        return head_sup <= spec.c * math.sqrt(logn) and tail_after_vn <= tail_budget
    if fam == "H3":
        return suffix[0] <= spec.c and tail_after_vn <= tail_budget
    # Hm / HE: total l1 bound plus a tail bound at every integer r >= q; past
    # the last nonzero the tail is zero and the (positive) bound always holds.
    if suffix[0] > spec.c:
        return False
    r0 = max(1, int(math.ceil(spec.q)))
    for r in range(r0, length):
        bound = r ** (-spec.m) if fam == "Hm" else math.exp(-spec.c_dprime * r)
        if suffix[r] > bound:
            return False
    return True


def witness_flat_head(spec: FamilySpec) -> np.ndarray:
    """(1, C, ..., C, 0, ...) with ~v_n copies of C: in Hb, not in H3 once
    v_n * C exceeds the l1 budget C."""
    reps = max(2, int(math.floor(spec.v_n)))
    return np.concatenate([[1.0], np.full(reps, spec.c), np.zeros(8)])


def witness_geometric_tail(spec: FamilySpec, length: int | None = None) -> np.ndarray:
    """(1, (1/2) C' delta/ln n, (1/4) C' delta/ln n, ...): in H3, not in Hb
    (more than v_n nonzero entries)."""
    if length is None:
        length = int(math.floor(spec.v_n)) + 40
    base = spec.c_prime * spec.delta_n / math.log(spec.n)
    tail = base * 0.5 ** np.arange(1, length + 1)
    return np.concatenate([[1.0], tail])


# Inclusions tested empirically: a member of the first family must
# be a member of the second. Each entry fixes the delta_n regime under which
# the inclusion is claimed ("default" means delta_n = n^{-1/2} (ln n)^2).
INCLUSION_PAIRS = (
    ("H2", "H1", "default"),
    ("H3", "H2", "default"),
    ("Hb", "H2", "default"),
    ("HE", "Hm", "default"),
    ("Hm", "H3", "poly"),   # delta_n = n^{-m/(2m+1)} (ln n)^2
    ("HE", "H3", "default"),
)


def _ambient_delta(regime: str, n: int, m: float) -> float:
    if regime == "poly":
        return n ** (-m / (2.0 * m + 1.0)) * math.log(n) ** 2
    return math.log(n) ** 2 / math.sqrt(n)


def _random_betas(stream: Stream, count: int, spec: FamilySpec) -> list:
    """A mix of head/tail shapes that lands on both sides of each family."""
    out = []
    logn = math.log(spec.n)
    base_tail = spec.c_prime * spec.delta_n / logn
    for _ in range(count):
        pick = stream.uniform()
        length = 30 + int(stream.uniform() * 2000)
        if pick < 0.25:
            # few hard coefficients
            s = 1 + int(stream.uniform() * 25)
            vals = spec.c * math.sqrt(logn) * 1.3 * stream.uniforms(s)
            beta = np.concatenate([vals, np.zeros(length - s)])
        elif pick < 0.5:
            # geometric decay
            xi = 0.3 + 0.65 * stream.uniform()
            scale = 2.0 * spec.c * (1 - xi) * stream.uniform()
            beta = scale * xi ** np.arange(1, length + 1)
        elif pick < 0.75:
            # polynomial decay
            p = 1.2 + 2.5 * stream.uniform()
            scale = 1.5 * spec.c * stream.uniform()
            beta = scale * np.arange(1, length + 1) ** (-p)
        else:
            # dense small + a few spikes
            beta = 2.0 * base_tail / length * stream.uniforms(length)
            s = 1 + int(stream.uniform() * 5)
            beta[:s] += spec.c * stream.uniforms(s)
        signs = np.where(stream.uniforms(length) < 0.5, -1.0, 1.0)
        perm = stream.permutation(length)
        out.append(np.concatenate([[1.0], (beta * signs)[perm]]))
    return out


def check_inclusions(n_grid=(10 ** 6, 10 ** 9), trials: int = 2000,
                     seed: int = 20240811, c: float = 2.0, c_prime: float = 1.0,
                     c_dprime: float = 0.5, m: float = 2.0,
                     q: float = 25.0) -> dict:
    """Empirically verify the claimed family inclusions on random rules.

    Returns a report with per-pair member counts and any counterexamples
    (expected none). ``q`` must be large enough that exp(-C'' r) <= r^-m for
    all r >= q, which is what the HE-in-Hm part assumes.
    """
    stream = Stream.from_seed(seed).derive(ORACLE).derive(0x31)
    report = {"pairs": {}, "violations": 0, "trials_per_pair": {}}
    for small, big, regime in INCLUSION_PAIRS:
        members = 0
        checked = 0
        bad = []
        for n in n_grid:
            delta = _ambient_delta(regime, n, m)
            base = FamilySpec(family=small, n=n, delta_n=delta, c=c,
                              c_prime=c_prime, c_dprime=c_dprime, m=m, q=q)
            target = replace(base, family=big)
            for beta in _random_betas(stream, trials // len(n_grid), base):
                checked += 1
                if is_member(beta, base):
                    members += 1
                    if not is_member(beta, target):
                        bad.append(beta)
        key = f"{small}->{big}"
        report["pairs"][key] = {"checked": checked, "members": members,
                               "violations": len(bad)}
        report["trials_per_pair"][key] = checked
        report["violations"] += len(bad)
    return report
