"""Shared domain records, validation, and regularity-condition checks.

All records are immutable after construction (arrays are marked read-only),
so they are safe to share across threads. ``log n`` always means the natural
logarithm here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "ModelIndicator",
    "Coefficients",
    "RiskSpec",
    "PriorSpec",
    "ConditionReport",
    "ConditionEntry",
    "derive_risk_spec",
    "validate_conditions",
    "default_delta",
    "auto_prior_spec",
    "CLASSIFICATION_RHO",
]

#: 0/1 misclassification loss matrix rho[y][a].
CLASSIFICATION_RHO = ((0.0, 1.0), (1.0, 0.0))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """n labeled observations over K standardized features.

    The first feature column is the anchor: it is part of every model and its
    coefficient is fixed to +/-1 by the decision-rule standardization.
    """

    labels: np.ndarray  # (n,) int64 in {0, 1}
    features: np.ndarray  # (n, K) float64, entries in [-1, 1]
    provenance: str = ""
    anchor_index: int = 0
    declares_bounded_anchor_density: bool = True  # generator-declared 0''

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        feats = np.asarray(self.features, dtype=np.float64)
        if labels.ndim != 1 or feats.ndim != 2 or feats.shape[0] != labels.shape[0]:
            raise ValueError("labels must be (n,), features (n, K)")
        if labels.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("need n >= 1 and K >= 1")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be exactly 0 or 1")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        if np.max(np.abs(feats)) > 1.0:
            raise ValueError("feature entries must satisfy |x| <= 1 (condition 0')")
        if self.anchor_index != 0:
            raise ValueError("anchor feature must be column 0")
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(self, "features", _readonly(feats))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def k(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ModelIndicator:
    """Binary model indicator over all K features; the anchor bit is always 1."""

    bits: np.ndarray  # (K,) bool

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 1 or bits.shape[0] < 1:
            raise ValueError("bits must be a length-K vector")
        if not bits[0]:
            raise ValueError("anchor bit gamma_1 must be 1")
        object.__setattr__(self, "bits", _readonly(bits))

    @classmethod
    def from_active(cls, k: int, active: "list[int] | np.ndarray") -> "ModelIndicator":
        """Indicator with the anchor plus the given non-anchor feature columns."""
        bits = np.zeros(k, dtype=bool)
        bits[0] = True
        active = np.asarray(active, dtype=np.int64)
        if active.size:
            if active.min() < 1 or active.max() >= k:
                raise ValueError("active indices must be non-anchor columns in [1, K)")
            bits[active] = True
        return cls(bits)

    @property
    def size(self) -> int:
        """|gamma|_1 including the anchor."""
        return int(np.count_nonzero(self.bits))

    @property
    def active(self) -> np.ndarray:
        """Selected non-anchor feature columns, ascending."""
        return np.flatnonzero(self.bits[1:]) + 1


@dataclass(frozen=True)
class Coefficients:
    """Standardized coefficients: anchor sign plus the active values.

    ``active`` aligns with ``ModelIndicator.active`` (ascending column order).
    """

    beta1: float
    active: np.ndarray

    def __post_init__(self):
        if self.beta1 not in (1.0, -1.0):
            raise ValueError("beta1 must be +1 or -1")
        vals = np.asarray(self.active, dtype=np.float64)
        if vals.ndim != 1 or not np.all(np.isfinite(vals)):
            raise ValueError("active coefficients must be a finite 1-d vector")
        object.__setattr__(self, "active", _readonly(vals))

    def matches(self, indicator: ModelIndicator) -> bool:
        return self.active.shape[0] == indicator.size - 1


@dataclass(frozen=True)
class RiskSpec:
    """Loss matrix with its derived (q, h, p0, p1), temperature and smoothing.

    ``p0_bar``/``p1_bar`` are the complements 1 - p0 and 1 - p1 computed in
    stable form; for sharp losses (large psi*q) the naive subtraction rounds
    p1 to 1 while the complement is still representable.
    """

    rho: np.ndarray  # (2, 2); rho[y, a]
    psi: float
    sigma_n: float
    q: float
    h: float
    p0: float
    p1: float
    p0_bar: float
    p1_bar: float

    def __post_init__(self):
        object.__setattr__(self, "rho", _readonly(np.asarray(self.rho, dtype=np.float64)))

    @property
    def risk_bound(self) -> float:
        """Q such that the smoothed sample risk lies in [0, Q]."""
        return math.log(1.0 / min(self.p0, self.p1_bar)) / self.psi

    @property
    def is_classification(self) -> bool:
        return bool(np.array_equal(self.rho, np.array(CLASSIFICATION_RHO)))


def derive_risk_spec(rho, psi: float, sigma_n: float) -> RiskSpec:
    """Build a RiskSpec from a 2x2 loss matrix, temperature weight and smoothing.

    q = rho(1,0)+rho(0,1)-rho(1,1)-rho(0,0), h = (rho(0,1)-rho(0,0))/q,
    p0 = (e^{psi h q}-1)/(e^{psi q}-1), p1 = (1-e^{-psi h q})/(1-e^{-psi q}).
    """
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (2, 2) or not np.all(np.isfinite(rho)):
        raise ValueError("rho must be a finite 2x2 matrix")
    if not (rho[0, 0] < rho[0, 1]):
        raise ValueError("need rho(0,0) < rho(0,1): acting must cost on negatives")
    if not (rho[1, 1] < rho[1, 0]):
        raise ValueError("need rho(1,1) < rho(1,0): not acting must cost on positives")
    if not (psi > 0.0 and math.isfinite(psi)):
        raise ValueError("psi must be positive")
    if not (sigma_n > 0.0 and math.isfinite(sigma_n)):
        raise ValueError("sigma_n must be positive")
    q = float(rho[1, 0] + rho[0, 1] - rho[1, 1] - rho[0, 0])
    h = float((rho[0, 1] - rho[0, 0]) / q)
    a = psi * q
    # expm1 keeps everything stable for small psi*q; the factored complements
    # stay positive even when p1 rounds to 1
    p0 = math.expm1(a * h) / math.expm1(a)
    p1 = math.expm1(-a * h) / math.expm1(-a)
    p0_bar = math.expm1(a * (1.0 - h)) * math.exp(a * h) / math.expm1(a)
    p1_bar = math.expm1(-a * (1.0 - h)) * math.exp(-a * h) / math.expm1(-a)
    if not (0.0 < p0 < p1 <= 1.0 and p0_bar > 0.0 and p1_bar > 0.0):
        raise ValueError("derived (p0, p1) degenerate; psi*q is numerically extreme")
    return RiskSpec(rho=rho, psi=float(psi), sigma_n=float(sigma_n),
                    q=q, h=h, p0=p0, p1=p1, p0_bar=p0_bar, p1_bar=p1_bar)


@dataclass(frozen=True)
class PriorSpec:
    """Size-restricted normal-binary prior: selection lambda, cap rbar, variance v."""

    lam: float
    rbar: int
    v: float
    k: int

    def __post_init__(self):
        if not (0.0 < self.lam < 1.0):
            raise ValueError("selection probability lambda must be in (0, 1)")
        if not (1 <= self.rbar <= self.k):
            raise ValueError("size cap rbar must satisfy 1 <= rbar <= K")
        if not (self.v > 0.0 and math.isfinite(self.v)):
            raise ValueError("prior variance v must be positive")

    @property
    def max_active(self) -> int:
        """Largest number of non-anchor coefficients a model may carry."""
        return self.rbar - 1


def default_delta(n: int) -> float:
    """delta_n = n^{-1/2} (ln n)^2, the sharpest rate regime."""
    return (math.log(n) ** 2) / math.sqrt(n)


def auto_prior_spec(n: int, k: int, v: float = 1.0, delta_n: float | None = None,
                    m_const: float = 2.0) -> PriorSpec:
    """Prior hyperparameters sitting inside the (r_delta) window.

    rbar = max(1, floor(M n delta^2 / (ln n)^2)) and lambda solves
    lambda*K = rbar/2.
    """
    if delta_n is None:
        delta_n = default_delta(n)
    vn = n * delta_n ** 2 / math.log(n) ** 2
    rbar = max(1, min(k, int(math.floor(m_const * vn))))
    lam = rbar / (2.0 * k)
    lam = min(max(lam, 1e-12), 1.0 - 1e-12)
    return PriorSpec(lam=lam, rbar=rbar, v=v, k=k)


@dataclass(frozen=True)
class ConditionEntry:
    name: str
    status: str  # "pass" | "warn" | "fail"
    message: str


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the regularity-condition checks for one run.

    Hard conditions (0', (V), rbar >= 1) block a run on failure; the
    asymptotic-regime conditions (1', 3', (sigma), (r_delta)) only warn.
    """

    entries: tuple
    delta_n: float

    @property
    def blocking(self) -> bool:
        return any(e.status == "fail" for e in self.entries)

    def entry(self, name: str) -> ConditionEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_json_obj(self) -> dict:
        out = {e.name: {"name": e.name, "status": e.status, "message": e.message}
               for e in self.entries}
        out["delta_n"] = self.delta_n
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True)


def validate_conditions(dataset: Dataset, prior: PriorSpec, risk: RiskSpec,
                        delta_n: float | None = None, m_const: float = 2.0,
                        m_prime: float = 0.5, v_bound: float = 100.0) -> ConditionReport:
    """Check the regularity-condition collection on a concrete run setup.

    ``m_const``/``m_prime`` are the (r_delta) window constants and ``v_bound``
    the eigenvalue bound B in (V).
    """
    n, k = dataset.n, dataset.k
    if delta_n is None:
        delta_n = default_delta(n)
    logn = math.log(n) if n > 1 else 1.0
    entries = []

    amax = float(np.max(np.abs(dataset.features)))
    if amax <= 1.0:
        entries.append(ConditionEntry("zero_prime", "pass",
                                      f"all |x| <= 1 (max |x| = {amax:.6g})"))
    else:
        entries.append(ConditionEntry("zero_prime", "fail",
                                      f"feature magnitude {amax:.6g} exceeds 1"))

    if dataset.declares_bounded_anchor_density:
        entries.append(ConditionEntry("zero_double_prime", "pass",
                                      "generator declares a bounded conditional "
                                      "density for the anchor feature"))
    else:
        entries.append(ConditionEntry("zero_double_prime", "warn",
                                      "generator declares the anchor conditional "
                                      "density unbounded/discrete; asymptotic "
                                      "guarantees that need it do not apply"))

    lo = logn / math.sqrt(n)
    if lo < delta_n < 1.0:
        entries.append(ConditionEntry("one_prime", "pass",
                                      f"{lo:.4g} < delta_n = {delta_n:.4g} < 1"))
    else:
        entries.append(ConditionEntry("one_prime", "warn",
                                      f"delta_n = {delta_n:.4g} outside "
                                      f"({lo:.4g}, 1); rate regime not in force"))

    if n < k:
        entries.append(ConditionEntry("three_prime", "pass", f"n = {n} < K = {k}"))
    else:
        entries.append(ConditionEntry("three_prime", "warn",
                                      f"K = {k} <= n = {n}; not the "
                                      "high-dimensional regime"))

    sig_edge = math.sqrt(n / logn)
    # 1-ulp slack: the default rule sigma_n = sqrt(ln n / n) sits exactly here
    if 1.0 / risk.sigma_n >= sig_edge * (1.0 - 1e-12):
        entries.append(ConditionEntry("sigma", "pass",
                                      f"1/sigma_n = {1.0 / risk.sigma_n:.4g} >= "
                                      f"(n/ln n)^(1/2) = {sig_edge:.4g}"))
    else:
        entries.append(ConditionEntry("sigma", "warn",
                                      f"smoothing too wide: 1/sigma_n = "
                                      f"{1.0 / risk.sigma_n:.4g} < {sig_edge:.4g}"))

    vb = max(prior.v, 1.0 / prior.v)
    if vb <= v_bound:
        entries.append(ConditionEntry("V", "pass",
                                      f"max(v, 1/v) = {vb:.4g} <= B = {v_bound:.4g}"))
    else:
        entries.append(ConditionEntry("V", "fail",
                                      f"max(v, 1/v) = {vb:.4g} exceeds B = {v_bound:.4g}"))

    vn = n * delta_n ** 2 / logn ** 2
    lam_k = prior.lam * k
    cap = max(1, int(math.floor(m_const * vn)))
    msgs = []
    if not (m_prime * vn <= lam_k):
        msgs.append(f"lambda*K = {lam_k:.4g} below M'*n*delta^2/(ln n)^2 = "
                    f"{m_prime * vn:.4g}")
    if not (lam_k <= prior.rbar):
        msgs.append(f"lambda*K = {lam_k:.4g} exceeds rbar = {prior.rbar}")
    if prior.rbar > cap:
        msgs.append(f"rbar = {prior.rbar} exceeds the (r_delta) ceiling {cap}")
    if msgs:
        entries.append(ConditionEntry("r_delta", "warn", "; ".join(msgs)))
    else:
        entries.append(ConditionEntry("r_delta", "pass",
                                      f"{m_prime * vn:.4g} <= lambda*K = "
                                      f"{lam_k:.4g} <= rbar = {prior.rbar} <= {cap}"))

    return ConditionReport(entries=tuple(entries), delta_n=float(delta_n))
