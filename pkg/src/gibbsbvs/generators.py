"""Synthetic data generators and CSV ingestion.

Every generator is a pure function of (spec, seed). The sparse-linear
generator separates the truth-defining stream from the data stream so that
holdout sets of any size share the training run's true rule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import rng as _rng
from .core import Dataset
from .rng import Stream

__all__ = [
    "GeneratorSpec",
    "generate",
    "gen_misspecified_logistic",
    "gen_indicator_grid",
    "gen_sparse_linear",
    "ingest_csv",
    "finite_support",
    "sparse_linear_truth",
]

KINDS = ("misspecified-logistic", "indicator-grid", "sparse-linear", "file")

# generator-declared condition 0'' (bounded conditional density of the anchor):
# the two counterexample generators have a discrete anchor, so it fails there.
_DECLARES_0PP = {
    "misspecified-logistic": False,
    "indicator-grid": False,
    "sparse-linear": True,
}


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of one synthetic generator (or a file source)."""

    kind: str
    n: int = 0
    lam: float = 0.125
    k: int = 2
    support: int = 0
    coef_scale: float = 1.0
    noise: float = 0.0
    truth_seed: int = 0
    path: str = ""
    label_column: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.kind == "misspecified-logistic" and not 0.0 < self.lam < 0.25:
            raise ValueError("lambda must lie in (0, 0.25)")
        if self.kind == "indicator-grid" and self.k < 2:
            raise ValueError("indicator grid needs K >= 2")
        if self.kind == "sparse-linear":
            if not 0 <= self.support < self.k:
                raise ValueError("support must satisfy 0 <= support < K")
            if not 0.0 <= self.noise < 0.5:
                raise ValueError("label noise must lie in [0, 0.5)")
            if self.coef_scale <= 0.0:
                raise ValueError("coef_scale must be positive")

    def with_size(self, n: int) -> "GeneratorSpec":
        return replace(self, n=n)

    @property
    def declares_0pp(self) -> bool:
        return _DECLARES_0PP.get(self.kind, True)


def generate(spec: GeneratorSpec, seed: int, stream_tag: int = _rng.GENERATOR) -> Dataset:
    """Emit a dataset from ``spec``; deterministic given (spec, seed, tag)."""
    if spec.kind == "misspecified-logistic":
        return _misspecified_logistic(spec.lam, spec.n, seed, stream_tag)
    if spec.kind == "indicator-grid":
        return _indicator_grid(spec.k, spec.n, seed, stream_tag)
    if spec.kind == "sparse-linear":
        data, _ = _sparse_linear(spec, seed, stream_tag)
        return data
    if spec.kind == "file":
        return ingest_csv(spec.path, spec.label_column)
    raise ValueError(spec.kind)


def _chk(n: int):
    if n < 1:
        raise ValueError("need n >= 1")


def _misspecified_logistic(lam: float, n: int, seed: int, tag: int) -> Dataset:
    _chk(n)
    if not 0.0 < lam < 0.25:
        raise ValueError("lambda must lie in (0, 0.25)")
    s = Stream.from_seed(seed).derive(tag).derive(0x21)
    u = s.uniforms(n)
    x = np.where(u < lam, -1.0, np.where(u < 2.0 * lam, 1.0, 0.0))
    feats = np.column_stack([x, np.ones(n)])
    labels = (x != 0.0).astype(np.int64)
    return Dataset(labels=labels, features=feats,
                   provenance=f"misspecified-logistic(lam={lam}, n={n}, seed={seed})",
                   declares_bounded_anchor_density=False)


def gen_misspecified_logistic(lam: float, n: int, seed: int) -> Dataset:
    """Anchor x in {-1, 0, 1} with P(x = +/-1) = lambda, intercept column of
    ones, and deterministic labels y = I[x != 0]."""
    return _misspecified_logistic(lam, n, seed, _rng.GENERATOR)


def _indicator_grid(k: int, n: int, seed: int, tag: int) -> Dataset:
    _chk(n)
    if k < 2:
        raise ValueError("need K >= 2")
    s = Stream.from_seed(seed).derive(tag).derive(0x22)
    t = np.minimum((s.uniforms(n) * k).astype(np.int64) + 1, k)  # z = t/K
    feats = np.zeros((n, k))
    feats[np.arange(n), k - t] = 1.0  # x_j = I[z = (K+1-j)/K]
    labels = (t == k).astype(np.int64)
    return Dataset(labels=labels, features=feats,
                   provenance=f"indicator-grid(K={k}, n={n}, seed={seed})",
                   declares_bounded_anchor_density=False)


def gen_indicator_grid(k: int, n: int, seed: int) -> Dataset:
    """One-hot features over a uniform K-point grid; the anchor column equals
    the label, so the anchor-only rule is perfect."""
    return _indicator_grid(k, n, seed, _rng.GENERATOR)


def sparse_linear_truth(spec: GeneratorSpec) -> np.ndarray:
    """The assembled true coefficient vector of a sparse-linear spec."""
    if spec.kind != "sparse-linear":
        raise ValueError("truth is only defined for sparse-linear specs")
    ts = Stream.from_seed(spec.truth_seed).derive(_rng.GENERATOR).derive(0x23)
    beta = np.zeros(spec.k)
    beta[0] = 1.0
    if spec.support:
        cols = ts.permutation(spec.k - 1)[:spec.support] + 1
        signs = np.where(ts.uniforms(spec.support) < 0.5, -1.0, 1.0)
        beta[cols] = spec.coef_scale * signs
    return beta


def _sparse_linear(spec: GeneratorSpec, seed: int, tag: int):
    _chk(spec.n)
    beta = sparse_linear_truth(spec)
    s = Stream.from_seed(seed).derive(tag).derive(0x24)
    feats = 2.0 * s.uniforms(spec.n * spec.k).reshape(spec.n, spec.k) - 1.0
    clean = (feats @ beta > 0.0)
    flips = s.uniforms(spec.n) < spec.noise
    labels = (clean ^ flips).astype(np.int64)
    data = Dataset(labels=labels, features=feats,
                   provenance=(f"sparse-linear(K={spec.k}, n={spec.n}, "
                               f"support={spec.support}, scale={spec.coef_scale}, "
                               f"noise={spec.noise}, truth_seed={spec.truth_seed}, "
                               f"seed={seed})"))
    return data, beta


def gen_sparse_linear(k: int, n: int, support: int, coef_scale: float,
                      noise: float, seed: int) -> tuple[Dataset, np.ndarray]:
    """Uniform[-1,1] features, a sparse true rule (anchor coefficient 1 plus
    ``support`` entries of magnitude ``coef_scale``), labels flipped with
    probability ``noise``. Returns (dataset, true assembled beta)."""
    spec = GeneratorSpec(kind="sparse-linear", n=n, k=k, support=support,
                         coef_scale=coef_scale, noise=noise, truth_seed=seed)
    return _sparse_linear(spec, seed, _rng.GENERATOR)


def finite_support(spec: GeneratorSpec):
    """(weights, features, labels) enumerating a finite-support generator."""
    if spec.kind == "misspecified-logistic":
        weights = np.array([spec.lam, 1.0 - 2.0 * spec.lam, spec.lam])
        feats = np.array([[-1.0, 1.0], [0.0, 1.0], [1.0, 1.0]])
        labels = np.array([1, 0, 1], dtype=np.int64)
        return weights, feats, labels
    if spec.kind == "indicator-grid":
        k = spec.k
        feats = np.eye(k)[::-1].copy()  # rows t = 1..K, one-hot at K - t
        labels = np.zeros(k, dtype=np.int64)
        labels[-1] = 1
        return np.full(k, 1.0 / k), feats, labels
    raise ValueError(f"generator kind {spec.kind!r} has no finite support")


def ingest_csv(path: str, label_column: str,
               anchor_column: str | None = None) -> Dataset:
    """Load a CSV, map every feature column affinely onto [-1, 1].

    Constant columns map to zero. The anchor becomes the first feature column
    (``anchor_column`` if given, else the first non-label column); the affine
    maps are recorded in the provenance string.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if label_column not in header:
        raise ValueError(f"{path}: no column named {label_column!r}")

    cols = {}
    for j, name in enumerate(header):
        vals = []
        for i, row in enumerate(rows):
            try:
                vals.append(float(row[j]))
            except (ValueError, IndexError):
                raise ValueError(
                    f"{path}: non-numeric cell in column {name!r}, row {i + 2}"
                ) from None
        cols[name] = np.array(vals)

    labels = cols[label_column]
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise ValueError(f"{path}: label column {label_column!r} is not binary")

    feature_names = [c for c in header if c != label_column]
    if anchor_column is not None:
        if anchor_column not in feature_names:
            raise ValueError(f"{path}: anchor column {anchor_column!r} missing")
        feature_names.remove(anchor_column)
        feature_names.insert(0, anchor_column)

    feats = np.empty((len(rows), len(feature_names)))
    maps = []
    for j, name in enumerate(feature_names):
        x = cols[name]
        lo, hi = float(np.min(x)), float(np.max(x))
        if hi > lo:
            feats[:, j] = -1.0 + 2.0 * (x - lo) / (hi - lo)
        else:
            feats[:, j] = 0.0
        maps.append(f"{name}:[{lo:g},{hi:g}]->[-1,1]")
    return Dataset(labels=labels.astype(np.int64), features=feats,
                   provenance=f"csv({path}; " + "; ".join(maps) + ")",
                   declares_bounded_anchor_density=False)
