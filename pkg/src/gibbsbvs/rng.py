"""Counter-based splittable random streams.

A :class:`Stream` is (key, counter) over the SplitMix64 counter generator in
:mod:`gibbsbvs._kernels`. Substreams are named, not numbered-by-consumption:
``stream.derive(tag)`` gives an independent stream whatever has been drawn so
far, which is what makes chains, generators and evaluators reproducible
independently of each other.

Fixed top-level tags (all streams in the package hang off these):

  ============  ====================================================
  tag           purpose
  ============  ====================================================
  CHAIN         sampler chain ``derive(CHAIN).derive(chain_id)``
  GENERATOR     synthetic data generators
  EVAL          Monte Carlo risk evaluation (never shared with chains)
  ORACLE        oracle-side randomness (perturbations, trial draws)
  ============  ====================================================

Within a chain, sweep ``t`` uses ``chain.derive(t)`` and each sampler step a
fixed step tag; coordinate-level keys are derived inside the kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k

U64 = np.uint64
_MASK = (1 << 64) - 1

# top-level stream tags
CHAIN = 0x01
GENERATOR = 0x02
EVAL = 0x03
ORACLE = 0x04

# per-sweep step tags
STEP_Z = 0x10
STEP_SIGN = 0x11
STEP_INDICATOR = 0x12
STEP_COEF = 0x13


def _root_key(seed: int) -> np.uint64:
    # njit functions box uint64 returns as Python ints; re-wrap so the key
    # stays a uint64 (plain ints >= 2**63 don't coerce back into kernels).
    with np.errstate(over="ignore"):
        return U64(_k.mix64(U64(seed & _MASK) ^ U64(0xA0761D6478BD642F)))


@dataclass
class Stream:
    """One named random stream; drawing advances ``counter`` only."""

    key: np.uint64
    counter: int = 0

    @classmethod
    def from_seed(cls, seed: int) -> "Stream":
        return cls(key=_root_key(seed))

    def derive(self, tag: int) -> "Stream":
        """Independent substream named by ``tag``; does not consume draws."""
        with np.errstate(over="ignore"):
            return Stream(key=U64(_k.derive_key(self.key, U64(tag & _MASK))))

    # -- scalar draws -------------------------------------------------------

    def u64(self) -> int:
        with np.errstate(over="ignore"):
            out = _k.stream_u64(self.key, U64(self.counter))
        self.counter += 1
        return int(out)

    def uniform(self) -> float:
        with np.errstate(over="ignore"):
            out = _k.u01(self.key, U64(self.counter))
        self.counter += 1
        return float(out)

    def normal(self) -> float:
        return float(_k.norm_ppf(self.uniform()))

    # -- vectorized draws ---------------------------------------------------

    def uniforms(self, m: int) -> np.ndarray:
        """m draws in (0,1); same values as m scalar ``uniform()`` calls."""
        ctrs = U64(self.counter) + np.arange(1, m + 1, dtype=np.uint64)
        z = self.key + ctrs * U64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> U64(27))) * U64(0x94D4A2C62CA67CC5)
        z = z ^ (z >> U64(31))
        self.counter += m
        return ((z >> U64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def normals(self, m: int) -> np.ndarray:
        return norm_ppf_vec(self.uniforms(m))

    def permutation(self, m: int) -> np.ndarray:
        """Deterministic permutation of range(m) (argsort of fresh uniforms)."""
        return np.argsort(self.uniforms(m), kind="stable")

    def spawn_keys(self, m: int) -> np.ndarray:
        """m derived subkeys (tags 0..m-1) as a uint64 array."""
        tags = np.arange(1, m + 1, dtype=np.uint64) * U64(0xD1B54A32D192ED03)
        z = self.key ^ tags
        z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> U64(27))) * U64(0x94D4A2C62CA67CC5)
        return z ^ (z >> U64(31))


def norm_ppf_vec(p: np.ndarray) -> np.ndarray:
    """Vectorized AS 241 normal quantile (same algorithm as the kernel)."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)

    central = np.abs(q) <= 0.425
    r = 0.180625 - q[central] * q[central]
    num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
              + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
            + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
    den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
              + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
            + 4.2313330701600911252e1) * r + 1.0)
    out[central] = q[central] * num / den

    tails = ~central
    if np.any(tails):
        pt = p[tails]
        qt = q[tails]
        r = np.where(qt < 0.0, pt, 1.0 - pt)
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        rv = np.where(near, r - 1.6, r - 5.0)
        num_n = (((((((7.74545014278341407640e-4 * rv + 2.27238449892691845833e-2) * rv
                      + 2.41780725177450611770e-1) * rv + 1.27045825245236838258e0) * rv
                    + 3.64784832476320460504e0) * rv + 5.76949722146069140550e0) * rv
                  + 4.63033784615654529590e0) * rv + 1.42343711074968357734e0)
        den_n = (((((((1.05075007164441684324e-9 * rv + 5.47593808499534494600e-4) * rv
                      + 1.51986665636164571966e-2) * rv + 1.48103976427480074590e-1) * rv
                    + 6.89767334985100004550e-1) * rv + 1.67638483018380384940e0) * rv
                  + 2.05319162663775882187e0) * rv + 1.0)
        num_f = (((((((2.01033439929228813265e-7 * rv + 2.71155556874348757815e-5) * rv
                      + 1.24266094738807843860e-3) * rv + 2.65321895265761230930e-2) * rv
                    + 2.96560571828504891230e-1) * rv + 1.78482653991729133580e0) * rv
                  + 5.46378491116411436990e0) * rv + 6.65790464350110377720e0)
        den_f = (((((((2.04426310338993978564e-15 * rv + 1.42151175831644588870e-7) * rv
                      + 1.84631831751005468180e-5) * rv + 7.86869131145613259100e-4) * rv
                    + 1.48753612908506148525e-2) * rv + 1.36929880922735805310e-1) * rv
                  + 5.99832206555887937690e-1) * rv + 1.0)
        val = np.where(near, num_n / den_n, num_f / den_f)
        out[tails] = np.where(qt < 0.0, -val, val)
    return out
