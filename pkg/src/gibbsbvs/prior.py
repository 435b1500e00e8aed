"""The size-restricted normal-binary prior: sampling and log densities.

Truncation is rejection-until-accept against the size cap, which induces the
conditional-on-the-cap law whose model mass is
lambda^(r) (1-lambda)^(K-1-r) / Z_trunc with
Z_trunc = sum_{r <= rbar-1} C(K-1, r) lambda^r (1-lambda)^(K-1-r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Coefficients, ModelIndicator, PriorSpec
from .rng import Stream

__all__ = ["PriorDraw", "sample_prior", "log_prior_model",
           "log_prior_coefficients", "log_trunc_normalizer"]

_MAX_REJECTS = 10 ** 6


@dataclass(frozen=True)
class PriorDraw:
    indicator: ModelIndicator
    coefficients: Coefficients


def sample_prior(prior: PriorSpec, stream: Stream) -> PriorDraw:
    """Draw (gamma, beta1, active coefficients) from the prior.

    gamma_2..K are i.i.d. Bernoulli(lambda) redrawn until |gamma|_1 <= rbar;
    beta1 is uniform on {+1, -1}; active coefficients are N(0, v I).
    """
    for _ in range(_MAX_REJECTS):
        picks = stream.uniforms(prior.k - 1) < prior.lam
        if 1 + int(np.count_nonzero(picks)) <= prior.rbar:
            break
    else:
        raise RuntimeError(
            f"size cap rejected {_MAX_REJECTS} consecutive prior draws "
            f"(lambda*K = {prior.lam * prior.k:.3g} vs rbar = {prior.rbar}); "
            "the prior is pathologically mismatched to its cap")
    indicator = ModelIndicator.from_active(prior.k, np.flatnonzero(picks) + 1)
    beta1 = 1.0 if stream.uniform() < 0.5 else -1.0
    active = math.sqrt(prior.v) * stream.normals(indicator.size - 1)
    return PriorDraw(indicator, Coefficients(beta1=beta1, active=active))


def log_trunc_normalizer(prior: PriorSpec) -> float:
    """ln sum_{r=0}^{rbar-1} C(K-1, r) lambda^r (1-lambda)^(K-1-r)."""
    kk = prior.k - 1
    lnl = math.log(prior.lam)
    ln1m = math.log1p(-prior.lam)
    terms = []
    for r in range(min(prior.rbar - 1, kk) + 1):
        terms.append(math.lgamma(kk + 1) - math.lgamma(r + 1)
                     - math.lgamma(kk - r + 1) + r * lnl + (kk - r) * ln1m)
    top = max(terms)
    return top + math.log(sum(math.exp(t - top) for t in terms))


def log_prior_model(indicator: ModelIndicator, prior: PriorSpec) -> float:
    """Log mass of a model pattern under the truncated binary prior."""
    if indicator.bits.shape[0] != prior.k:
        raise ValueError("indicator length must equal K")
    size = indicator.size
    if size > prior.rbar:
        return float("-inf")
    r = size - 1
    return (r * math.log(prior.lam) + (prior.k - size) * math.log1p(-prior.lam)
            - log_trunc_normalizer(prior))


def log_prior_coefficients(coeffs: Coefficients, indicator: ModelIndicator,
                           prior: PriorSpec) -> float:
    """ln 0.5 for the sign plus the N(0, v I) log density of the active block."""
    if not coeffs.matches(indicator):
        raise ValueError("coefficient block does not match the indicator")
    d = coeffs.active.shape[0]
    quad = float(np.dot(coeffs.active, coeffs.active))
    return (math.log(0.5) - 0.5 * d * math.log(2.0 * math.pi * prior.v)
            - 0.5 * quad / prior.v)
