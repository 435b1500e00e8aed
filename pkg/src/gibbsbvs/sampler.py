"""Data-augmentation Gibbs sampler for the Gibbs posterior
omega(d beta | data) ∝ exp(-n psi R_n(beta)) pi(d beta), plus a Metropolis
backend targeting the unsmoothed empirical risk.

One sweep runs: latent update Z | beta, then the sign beta_1 | gamma, Z and
the indicator sweep gamma_j | rest with the active coefficients integrated
out, then a fresh coefficient draw. Chains are bit-reproducible for a fixed
(seed, config, backend build); every random decision draws from a
(chain, sweep, step, coordinate)-keyed stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from . import rng as _rng
from .core import Coefficients, Dataset, ModelIndicator, PriorSpec, RiskSpec
from .prior import log_prior_coefficients, log_prior_model
from .rng import Stream

__all__ = [
    "SamplerConfig",
    "SamplerState",
    "ChainOutput",
    "run_chain",
    "run_metropolis",
    "augmented_log_joint",
    "step1_update_z",
    "step2a_update_sign",
    "step2b_update_indicator",
    "step3_update_coefficients",
    "sign_log_weights",
    "indicator_branch_log_weights",
]

U64 = np.uint64
_MAX_Z_TRIES = 10 ** 6


@dataclass(frozen=True)
class SamplerConfig:
    iterations: int
    burn_in: int = 0
    thin: int = 1
    scan_order: str = "systematic"  # or "random": fresh permutation per sweep
    z_update: str = "exact-mixture"  # or "rejection": the retry-until-accept loop
    seed: int = 0
    backend: str = "gibbs"  # or "metropolis"
    chain_id: int = 0
    p_toggle: float = 0.45
    p_perturb: float = 0.35
    perturb_scale: float = 0.5

    def __post_init__(self):
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.scan_order not in ("systematic", "random"):
            raise ValueError("scan_order must be 'systematic' or 'random'")
        if self.z_update not in ("exact-mixture", "rejection"):
            raise ValueError("z_update must be 'exact-mixture' or 'rejection'")
        if self.backend not in ("gibbs", "metropolis"):
            raise ValueError("backend must be 'gibbs' or 'metropolis'")
        if not (0.0 <= self.p_toggle and 0.0 <= self.p_perturb
                and self.p_toggle + self.p_perturb <= 1.0):
            raise ValueError("move probabilities must be a sub-distribution")

    @property
    def n_kept(self) -> int:
        return (self.iterations - self.burn_in + self.thin - 1) // self.thin


@dataclass
class SamplerState:
    """The joint sampler state (latents, model, coefficients)."""

    z: np.ndarray
    indicator: ModelIndicator
    coefficients: Coefficients
    iteration: int = 0

    def __post_init__(self):
        z = np.ascontiguousarray(self.z, dtype=np.float64)
        if not np.all(np.isfinite(z)):
            raise ValueError("latent vector must be finite")
        if not self.coefficients.matches(self.indicator):
            raise ValueError("coefficients do not match the indicator")
        self.z = z

    def assembled(self) -> np.ndarray:
        beta = np.zeros(self.indicator.bits.shape[0])
        beta[0] = self.coefficients.beta1
        beta[self.indicator.active] = self.coefficients.active
        return beta


@dataclass(frozen=True)
class ChainOutput:
    """Thinned draws plus per-iteration traces; see ``write_trace_csv``."""

    kept_beta1: np.ndarray  # (m,)
    kept_d: np.ndarray  # (m,) number of active non-anchor coefficients
    kept_idx: np.ndarray  # (m, cap) 0-based non-anchor indices (col - 1)
    kept_vals: np.ndarray  # (m, cap)
    trace_model_size: np.ndarray
    trace_risk_smoothed: np.ndarray
    trace_beta1: np.ndarray
    trace_accepted: np.ndarray
    config: SamplerConfig
    k: int
    accepted_total: int

    @property
    def n_kept(self) -> int:
        return self.kept_beta1.shape[0]

    def iter_draws(self):
        """Yield (beta1, feature columns, values) per retained draw."""
        for t in range(self.n_kept):
            d = int(self.kept_d[t])
            order = np.argsort(self.kept_idx[t, :d], kind="stable")
            yield (float(self.kept_beta1[t]),
                   self.kept_idx[t, :d][order] + 1,
                   self.kept_vals[t, :d][order])

    def inclusion_frequencies(self) -> np.ndarray:
        """Per-feature posterior inclusion frequency (anchor is always 1)."""
        counts = np.zeros(self.k)
        counts[0] = self.n_kept
        for t in range(self.n_kept):
            d = int(self.kept_d[t])
            counts[self.kept_idx[t, :d] + 1] += 1.0
        return counts / max(self.n_kept, 1)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted_total / self.trace_accepted.shape[0]

    @property
    def posterior_mean_smoothed_risk(self) -> float:
        kept = self.trace_risk_smoothed[self.config.burn_in::self.config.thin]
        return float(np.mean(kept))

    def mean_rule_metric(self, fn) -> float:
        """Average fn(beta1, feature_cols, values) over retained draws."""
        total = 0.0
        for beta1, cols, vals in self.iter_draws():
            total += fn(beta1, cols, vals)
        return total / max(self.n_kept, 1)

    def write_trace_csv(self, path, meta: str | None = None) -> None:
        """Write the per-iteration trace; ``meta`` becomes a '#' comment line."""
        with open(path, "w", encoding="utf-8") as fh:
            if meta:
                fh.write(f"# {meta}\n")
            fh.write("iteration,model_size,R_n_smoothed,beta1,accepted_moves\n")
            for t in range(self.trace_model_size.shape[0]):
                fh.write(f"{t},{int(self.trace_model_size[t])},"
                         f"{self.trace_risk_smoothed[t]!r},"
                         f"{int(self.trace_beta1[t])},"
                         f"{int(self.trace_accepted[t])}\n")


class _Workspace:
    """Per-(data, risk, prior) arrays shared by all sweep kernels."""

    def __init__(self, data: Dataset, risk: RiskSpec, prior: PriorSpec):
        if prior.k != data.k:
            raise ValueError("prior K must match the dataset")
        feats = data.features
        self.y = np.ascontiguousarray(data.labels)
        self.x1 = np.ascontiguousarray(feats[:, 0])
        self.xtt = np.ascontiguousarray(feats[:, 1:].T)  # (K-1, n)
        self.gram = np.ascontiguousarray(self.xtt @ self.xtt.T)
        self.t1 = self.xtt @ self.x1
        self.x1x1 = float(self.x1 @ self.x1)
        self.sigma = risk.sigma_n
        self.sigma2 = risk.sigma_n ** 2
        self.ridge = self.sigma2 / prior.v
        self.ln_v_over_sig2 = math.log(prior.v / self.sigma2)
        self.lnlam = math.log(prior.lam)
        self.ln1mlam = math.log1p(-prior.lam)
        self.max_active = prior.max_active
        self.k = data.k
        self.n = data.n


def _chain_key(config: SamplerConfig) -> np.uint64:
    return Stream.from_seed(config.seed).derive(_rng.CHAIN).derive(config.chain_id).key


def _sweep_key(chain_key, t: int):
    with np.errstate(over="ignore"):
        return U64(_k.derive_key(chain_key, U64(t)))


def _step_key(sweep_key, tag: int):
    with np.errstate(over="ignore"):
        return U64(_k.derive_key(sweep_key, U64(tag)))


def run_chain(data: Dataset, risk: RiskSpec, prior: PriorSpec,
              config: SamplerConfig) -> ChainOutput:
    """Run the data-augmentation Gibbs chain and return thinned draws.

    Starts from the anchor-only model with beta1 = +1; the first sweep's
    latent pass creates Z.
    """
    if config.backend == "metropolis":
        return run_metropolis(data, risk, prior, config)
    ws = _Workspace(data, risk, prior)
    chain_key = _chain_key(config)
    cap = max(ws.max_active, 1)

    gamma = np.zeros(ws.k - 1, dtype=bool)
    idx = np.zeros(cap, dtype=np.int64)
    d = 0
    beta1 = 1.0
    vals = np.zeros(0)
    m = beta1 * ws.x1.copy()

    iters = config.iterations
    n_keep = config.n_kept
    kept_beta1 = np.empty(n_keep)
    kept_d = np.zeros(n_keep, dtype=np.int64)
    kept_idx = np.zeros((n_keep, cap), dtype=np.int64)
    kept_vals = np.zeros((n_keep, cap))
    trace_size = np.empty(iters, dtype=np.int64)
    trace_risk = np.empty(iters)
    trace_beta1 = np.empty(iters)
    trace_acc = np.empty(iters, dtype=np.int64)

    scan_base = np.arange(ws.k - 1, dtype=np.int64)
    kept = 0
    accepted_total = 0
    for t in range(iters):
        kt = _sweep_key(chain_key, t)
        if config.z_update == "exact-mixture":
            z = _k.step1_mixture(m, ws.y, risk.p0, risk.p1, risk.p0_bar,
                                 risk.p1_bar, ws.sigma,
                                 _step_key(kt, _rng.STEP_Z))
        else:
            z, ok = _k.step1_rejection(m, ws.y, risk.p0, risk.p1, risk.p0_bar,
                                       risk.p1_bar, ws.sigma,
                                       _step_key(kt, _rng.STEP_Z), _MAX_Z_TRIES)
            if not ok:
                raise RuntimeError(f"latent rejection loop exceeded "
                                   f"{_MAX_Z_TRIES} tries at sweep {t}")
        t0 = ws.xtt @ z
        zz = float(z @ z)
        zx1 = float(z @ ws.x1)
        new_beta1, ok = _k.step2a_sample(ws.gram, t0, ws.t1, zz, zx1, ws.x1x1,
                                         idx, d, ws.ridge, ws.sigma2,
                                         _step_key(kt, _rng.STEP_SIGN))
        if not ok:
            raise RuntimeError(f"sign update factorization failed at sweep {t}")
        sign_changed = new_beta1 != beta1
        beta1 = new_beta1
        c = t0 - beta1 * ws.t1
        if config.scan_order == "random":
            scan = Stream(key=_step_key(kt, 0x18)).permutation(ws.k - 1).astype(np.int64)
        else:
            scan = scan_base
        d, flips, ok = _k.step2b_sweep(ws.gram, c, gamma, idx, d, ws.max_active,
                                       ws.lnlam, ws.ln1mlam, ws.ridge, ws.sigma2,
                                       ws.ln_v_over_sig2, scan,
                                       _step_key(kt, _rng.STEP_INDICATOR))
        if not ok:
            raise RuntimeError(f"indicator sweep factorization failed at sweep {t}")
        vals, ok = _k.step3_draw(ws.gram, c, idx, d, ws.ridge, ws.sigma,
                                 _step_key(kt, _rng.STEP_COEF))
        if not ok:
            raise RuntimeError(f"coefficient draw factorization failed at sweep {t}")
        m = _k.rule_margins(ws.x1, ws.xtt, beta1, idx, d, vals)

        moves = int(flips) + (1 if sign_changed else 0)
        accepted_total += moves
        trace_size[t] = d + 1
        trace_risk[t] = _k.smoothed_risk(m, ws.y, risk.p0, risk.p1,
                                         risk.p0_bar, risk.p1_bar, risk.psi,
                                         ws.sigma)
        trace_beta1[t] = beta1
        trace_acc[t] = moves
        if t >= config.burn_in and (t - config.burn_in) % config.thin == 0:
            kept_beta1[kept] = beta1
            kept_d[kept] = d
            kept_idx[kept, :d] = idx[:d]
            kept_vals[kept, :d] = vals
            kept += 1

    return ChainOutput(kept_beta1=kept_beta1, kept_d=kept_d, kept_idx=kept_idx,
                       kept_vals=kept_vals, trace_model_size=trace_size,
                       trace_risk_smoothed=trace_risk, trace_beta1=trace_beta1,
                       trace_accepted=trace_acc, config=config, k=ws.k,
                       accepted_total=accepted_total)


def run_metropolis(data: Dataset, risk: RiskSpec, prior: PriorSpec,
                   config: SamplerConfig) -> ChainOutput:
    """Random-walk/birth-death Metropolis on exp(-n psi R_n^(i)) * prior.

    Targets the unsmoothed empirical loss-matrix risk (sample-risk choice (i));
    birth moves draw the new coefficient from its prior so the Gaussian factor
    cancels against the prior in the acceptance ratio.
    """
    ws = _Workspace(data, risk, prior)
    chain_key = _chain_key(config)
    cap = max(ws.max_active, 1)
    iters = config.iterations
    n_keep = config.n_kept

    kept_beta1 = np.empty(n_keep)
    kept_d = np.zeros(n_keep, dtype=np.int64)
    kept_idx = np.zeros((n_keep, cap), dtype=np.int64)
    kept_vals = np.zeros((n_keep, cap))
    trace_size = np.empty(iters, dtype=np.int64)
    trace_risk = np.empty(iters)
    trace_beta1 = np.empty(iters)
    trace_acc = np.empty(iters, dtype=np.int64)

    rho = risk.rho
    _, accepted = _k.metropolis_run(
        ws.x1, ws.xtt, ws.y, rho[0, 0], rho[0, 1], rho[1, 0], rho[1, 1],
        ws.n * risk.psi, prior.lam,
        prior.v, ws.max_active, iters, config.burn_in, config.thin,
        config.p_toggle, config.p_perturb, config.perturb_scale,
        risk.p0, risk.p1, risk.p0_bar, risk.p1_bar, risk.psi, ws.sigma,
        _step_key(chain_key, 0x30),
        trace_size, trace_risk, trace_beta1, trace_acc,
        kept_beta1, kept_d, kept_idx, kept_vals)

    return ChainOutput(kept_beta1=kept_beta1, kept_d=kept_d, kept_idx=kept_idx,
                       kept_vals=kept_vals, trace_model_size=trace_size,
                       trace_risk_smoothed=trace_risk, trace_beta1=trace_beta1,
                       trace_accepted=trace_acc, config=config, k=ws.k,
                       accepted_total=int(accepted))


# ---------------------------------------------------------------------------
# single-step operations (test surface; the chain uses the kernels directly)


def augmented_log_joint(state: SamplerState, data: Dataset, risk: RiskSpec,
                        prior: PriorSpec) -> float:
    """Complete-data log joint: Gaussian latents, mixture labels, and prior."""
    beta = state.assembled()
    m = data.features @ beta
    z = state.z
    sig2 = risk.sigma_n ** 2
    ll = -0.5 * len(z) * math.log(2.0 * math.pi * sig2)
    ll -= 0.5 * float(np.sum((z - m) ** 2)) / sig2
    p_side = np.where(z > 0.0, risk.p1, risk.p0)
    ll += float(np.sum(np.where(data.labels == 1, np.log(p_side),
                                np.log1p(-p_side))))
    ll += log_prior_model(state.indicator, prior)
    ll += log_prior_coefficients(state.coefficients, state.indicator, prior)
    return ll


def step1_update_z(state: SamplerState, data: Dataset, risk: RiskSpec,
                   stream: Stream, mechanism: str = "exact-mixture") -> np.ndarray:
    """Draw every Z_i from its exact full conditional given the current rule."""
    m = np.ascontiguousarray(data.features @ state.assembled())
    if mechanism == "exact-mixture":
        return np.asarray(_k.step1_mixture(m, data.labels, risk.p0, risk.p1,
                                           risk.p0_bar, risk.p1_bar,
                                           risk.sigma_n, stream.key))
    if mechanism == "rejection":
        z, ok = _k.step1_rejection(m, data.labels, risk.p0, risk.p1,
                                   risk.p0_bar, risk.p1_bar,
                                   risk.sigma_n, stream.key, _MAX_Z_TRIES)
        if not ok:
            raise RuntimeError("latent rejection loop exceeded its retry cap")
        return np.asarray(z)
    raise ValueError(f"unknown z mechanism {mechanism!r}")


def _ws_and_idx(state, data, risk, prior):
    ws = _Workspace(data, risk, prior)
    idx = np.ascontiguousarray(state.indicator.active - 1, dtype=np.int64)
    return ws, idx


def sign_log_weights(state: SamplerState, data: Dataset, risk: RiskSpec,
                     prior: PriorSpec) -> tuple[float, float]:
    """Log weights (shared constant dropped) of beta1 = +1 and -1 given (Z, gamma)."""
    ws, idx = _ws_and_idx(state, data, risk, prior)
    z = state.z
    t0 = ws.xtt @ z
    lw_p, lw_m, ok = _k.sign_log_weights(ws.gram, t0, ws.t1, float(z @ z),
                                         float(z @ ws.x1), ws.x1x1, idx,
                                         idx.shape[0], ws.ridge, ws.sigma2)
    if not ok:
        raise RuntimeError("sign update factorization failed")
    return float(lw_p), float(lw_m)


def step2a_update_sign(state: SamplerState, data: Dataset, risk: RiskSpec,
                       prior: PriorSpec, stream: Stream) -> float:
    ws, idx = _ws_and_idx(state, data, risk, prior)
    z = state.z
    t0 = ws.xtt @ z
    beta1, ok = _k.step2a_sample(ws.gram, t0, ws.t1, float(z @ z),
                                 float(z @ ws.x1), ws.x1x1, idx, idx.shape[0],
                                 ws.ridge, ws.sigma2, stream.key)
    if not ok:
        raise RuntimeError("sign update factorization failed")
    return float(beta1)


def indicator_branch_log_weights(state: SamplerState, data: Dataset,
                                 risk: RiskSpec, prior: PriorSpec,
                                 j: int) -> tuple[float, float]:
    """Unnormalised log weights of gamma_j = 0 and 1 with the others held fixed.

    ``j`` is a non-anchor feature column (1-based like the indicator). An
    infeasible gamma_j = 1 branch (size cap) comes back as -inf.
    """
    ws, idx = _ws_and_idx(state, data, risk, prior)
    if j < 1 or j >= ws.k:
        raise ValueError("j must be a non-anchor feature column")
    z = state.z
    c = ws.xtt @ z - state.coefficients.beta1 * ws.t1
    jj = j - 1
    without = np.ascontiguousarray(idx[idx != jj])
    with_j = np.ascontiguousarray(np.append(without, jj))
    lw0, ok0 = _k.branch_log_weight(ws.gram, c, without, without.shape[0], 0,
                                    ws.lnlam, ws.ln1mlam, ws.ridge, ws.sigma2,
                                    ws.ln_v_over_sig2)
    if with_j.shape[0] > ws.max_active:
        return float(lw0), float("-inf")
    lw1, ok1 = _k.branch_log_weight(ws.gram, c, with_j, with_j.shape[0], 1,
                                    ws.lnlam, ws.ln1mlam, ws.ridge, ws.sigma2,
                                    ws.ln_v_over_sig2)
    if not (ok0 and ok1):
        raise RuntimeError("indicator branch factorization failed")
    return float(lw0), float(lw1)


def step2b_update_indicator(state: SamplerState, data: Dataset, risk: RiskSpec,
                            prior: PriorSpec, stream: Stream,
                            scan_order: str = "systematic") -> ModelIndicator:
    ws, idx = _ws_and_idx(state, data, risk, prior)
    z = state.z
    c = ws.xtt @ z - state.coefficients.beta1 * ws.t1
    gamma = state.indicator.bits[1:].copy()
    cap = max(ws.max_active, 1)
    buf = np.zeros(cap, dtype=np.int64)
    buf[:idx.shape[0]] = idx
    if scan_order == "random":
        scan = stream.derive(0x18).permutation(ws.k - 1).astype(np.int64)
    else:
        scan = np.arange(ws.k - 1, dtype=np.int64)
    d, _, ok = _k.step2b_sweep(ws.gram, c, gamma, buf, idx.shape[0],
                               ws.max_active, ws.lnlam, ws.ln1mlam, ws.ridge,
                               ws.sigma2, ws.ln_v_over_sig2, scan, stream.key)
    if not ok:
        raise RuntimeError("indicator sweep factorization failed")
    return ModelIndicator.from_active(ws.k, np.flatnonzero(gamma) + 1)


def step3_update_coefficients(state: SamplerState, data: Dataset,
                              risk: RiskSpec, prior: PriorSpec,
                              stream: Stream) -> Coefficients:
    ws, idx = _ws_and_idx(state, data, risk, prior)
    z = state.z
    c = ws.xtt @ z - state.coefficients.beta1 * ws.t1
    vals, ok = _k.step3_draw(ws.gram, c, idx, idx.shape[0], ws.ridge, ws.sigma,
                             stream.key)
    if not ok:
        raise RuntimeError("coefficient draw factorization failed")
    return Coefficients(beta1=state.coefficients.beta1, active=np.asarray(vals))
