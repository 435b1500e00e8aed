"""Dense SPD kernels for S_gamma = (sigma^2/v) I + Xt_gamma' Xt_gamma.

Thin wrappers over the compiled kernels so the sampler and the tests share
one factorization route. Factors are immutable once built. A failed
factorization gets one jitter retry (1e-10 * trace/d on the diagonal) and
then raises: S_gamma is SPD by construction, so persistent failure means
overflow-scale inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .core import Dataset, ModelIndicator

__all__ = ["SpdFactor", "build_sgamma", "spd_solve", "log_det_ratio_term"]


@dataclass(frozen=True)
class SpdFactor:
    """Lower-triangular Cholesky factor of an SPD matrix with cached logdet."""

    dim: int
    lower: np.ndarray
    logdet: float

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        lo.setflags(write=False)
        object.__setattr__(self, "lower", lo)


def _factor(s: np.ndarray) -> SpdFactor:
    d = s.shape[0]
    if d == 0:
        return SpdFactor(dim=0, lower=np.zeros((0, 0)), logdet=0.0)
    if not np.all(np.isfinite(s)):
        raise ValueError("matrix has non-finite entries")
    idx = np.arange(d, dtype=np.int64)
    lo, ok = _k.factor_sgamma(np.ascontiguousarray(s), idx, d, 0.0)
    if not ok:
        raise np.linalg.LinAlgError("matrix is not positive definite "
                                    "(jitter retry exhausted)")
    logdet = 2.0 * float(np.sum(np.log(np.diag(lo))))
    return SpdFactor(dim=d, lower=lo, logdet=logdet)


def build_sgamma(data: Dataset, indicator: ModelIndicator, sigma: float,
                 v: float) -> SpdFactor:
    """Factor S_gamma over the selected non-anchor columns; dim = |gamma|_1 - 1."""
    if sigma <= 0.0 or v <= 0.0:
        raise ValueError("sigma and v must be positive")
    cols = indicator.active
    xg = data.features[:, cols]
    s = xg.T @ xg + (sigma * sigma / v) * np.eye(cols.shape[0])
    return _factor(s)


def spd_solve(factor: SpdFactor, rhs: np.ndarray) -> np.ndarray:
    """S^-1 rhs via the two triangular solves."""
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if rhs.shape != (factor.dim,):
        raise ValueError(f"rhs must have shape ({factor.dim},)")
    if factor.dim == 0:
        return np.zeros(0)
    return np.asarray(_k.chol_solve(factor.lower, rhs))


def log_det_ratio_term(factor: SpdFactor, sigma: float, v: float) -> float:
    """-0.5 ln det[I + sigma^-2 Xt'Xt v] via logdet S + d ln(v/sigma^2).

    Reuses the S_gamma factor instead of factorizing a second matrix.
    """
    return -0.5 * (factor.logdet + factor.dim * math.log(v / (sigma * sigma)))
