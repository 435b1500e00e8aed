"""Risk functionals: empirical loss-matrix risk, smoothed sample risk, and
population risk via Monte Carlo or exact enumeration.

Decision rules are linear: act iff x'beta > 0, with ties resolved to "don't
act" (strict inequality). All evaluators accept either a
:class:`DecisionRule` or a raw assembled coefficient vector, and are invariant
under positive rescaling of that vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from . import rng as _rng
from .core import Coefficients, Dataset, ModelIndicator, RiskSpec

__all__ = [
    "DecisionRule",
    "margins",
    "decide",
    "empirical_risk_unsmoothed",
    "sample_risk_smoothed",
    "population_risk_mc",
    "population_risk_analytic",
    "smoothing_limit_shift",
]


@dataclass(frozen=True)
class DecisionRule:
    """A sparse linear rule: model indicator plus standardized coefficients."""

    indicator: ModelIndicator
    coefficients: Coefficients

    def __post_init__(self):
        if not self.coefficients.matches(self.indicator):
            raise ValueError("coefficient length must match indicator size - 1")

    def assembled(self) -> np.ndarray:
        """Full K-vector with beta1 at the anchor and zeros off-model."""
        beta = np.zeros(self.indicator.bits.shape[0])
        beta[0] = self.coefficients.beta1
        beta[self.indicator.active] = self.coefficients.active
        return beta

    @classmethod
    def from_assembled(cls, beta: np.ndarray) -> "DecisionRule":
        beta = np.asarray(beta, dtype=np.float64)
        if abs(beta[0]) != 1.0:
            raise ValueError("assembled rule must have |beta1| = 1")
        active = np.flatnonzero(beta[1:] != 0.0) + 1
        return cls(ModelIndicator.from_active(beta.shape[0], active),
                   Coefficients(beta1=float(beta[0]), active=beta[active]))


def _as_beta(rule) -> np.ndarray:
    if isinstance(rule, DecisionRule):
        return rule.assembled()
    return np.asarray(rule, dtype=np.float64)


def margins(rule, features: np.ndarray) -> np.ndarray:
    return features @ _as_beta(rule)


def decide(rule, features: np.ndarray) -> np.ndarray:
    """A(x) = I[x'beta > 0] per row; the boundary x'beta = 0 maps to 0."""
    return (margins(rule, features) > 0.0).astype(np.int64)


def _rho_mean(m: np.ndarray, labels: np.ndarray, rho: np.ndarray) -> float:
    a = (m > 0.0).astype(np.int64)
    return float(np.mean(rho[labels, a]))


def empirical_risk_unsmoothed(rule, data: Dataset, spec: RiskSpec) -> float:
    """n^-1 sum_i rho(y_i, A(x_i)); the misclassification fraction for 0/1 loss."""
    return _rho_mean(margins(rule, data.features), data.labels, spec.rho)


def sample_risk_smoothed(rule, data: Dataset, spec: RiskSpec) -> float:
    """Smoothed sample risk with Phi(x'beta / sigma_n) in place of the indicator."""
    m = np.ascontiguousarray(margins(rule, data.features))
    return float(_k.smoothed_risk(m, data.labels, spec.p0, spec.p1,
                                  spec.p0_bar, spec.p1_bar,
                                  spec.psi, spec.sigma_n))


def smoothing_limit_shift(spec: RiskSpec, ybar: float) -> float:
    """Constant c with (smoothed sample risk as sigma_n -> 0) = rho-risk + c.

    Both risks equal q*E[A(h-y)] plus rule-independent constants; this is the
    difference of those constants at label mean ``ybar``.
    """
    c_smooth = -(ybar * math.log(spec.p0 / (1.0 - spec.p0))
                 + math.log(1.0 - spec.p0)) / spec.psi
    rho = spec.rho
    c_rho = rho[0, 0] + (rho[1, 0] - rho[0, 0]) * ybar
    return float(c_smooth - c_rho)


def population_risk_mc(rule, generator_spec, m: int, seed: int,
                       spec: RiskSpec | None = None) -> tuple[float, float]:
    """Monte Carlo estimate of E rho(y, A(x)) on fresh draws, with its SE.

    Uses a dedicated evaluation stream derived from ``seed``; never touches
    sampler streams. Deterministic given (generator_spec, m, seed).
    """
    from . import generators as _gen  # local import to avoid a cycle

    if m < 1:
        raise ValueError("need at least one Monte Carlo draw")
    data = _gen.generate(generator_spec.with_size(m), seed, stream_tag=_rng.EVAL)
    mg = margins(rule, data.features)
    if spec is None:
        losses = (data.labels != (mg > 0.0)).astype(np.float64)
    else:
        a = (mg > 0.0).astype(np.int64)
        losses = spec.rho[data.labels, a]
    est = float(np.mean(losses))
    se = float(np.std(losses, ddof=1) / math.sqrt(m)) if m > 1 else float("inf")
    return est, se


def population_risk_analytic(rule, generator_spec,
                             spec: RiskSpec | None = None) -> float:
    """Exact population risk by enumerating a finite-support generator."""
    from . import generators as _gen

    weights, feats, labels = _gen.finite_support(generator_spec)
    mg = margins(rule, feats)
    if spec is None:
        losses = (labels != (mg > 0.0)).astype(np.float64)
    else:
        a = (mg > 0.0).astype(np.int64)
        losses = spec.rho[labels, a]
    return float(np.dot(weights, losses))
