"""Independent brute-force references.

Everything here deliberately avoids the sampler's kernel code paths: normal
CDFs come from scipy, marginal likelihoods from dense n-by-n Gaussians,
posteriors from exhaustive enumeration. These are the second route in every
dual-route check of the test suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.special import ndtr

from . import rng as _rng
from .core import Dataset, ModelIndicator, PriorSpec, RiskSpec
from .prior import log_prior_model
from .rng import Stream

__all__ = [
    "smoothed_risk_reference",
    "rho_risk_reference",
    "GridPosterior",
    "exact_grid_posterior",
    "variational_check",
    "collapsed_log_marginal",
    "marginalize_latents_quadrature",
    "best_sparse_rule",
    "screen_columns",
    "logistic_mle_baseline",
    "no_selection_experiment",
]


def smoothed_risk_reference(beta: np.ndarray, data: Dataset,
                            spec: RiskSpec) -> float:
    """One-line reimplementation of the smoothed sample risk (scipy CDF)."""
    phi = ndtr(data.features @ beta / spec.sigma_n)
    y = data.labels
    bracket = (phi * spec.p1 ** y * (1.0 - spec.p1) ** (1 - y)
               + (1.0 - phi) * spec.p0 ** y * (1.0 - spec.p0) ** (1 - y))
    return float(-np.mean(np.log(bracket)) / spec.psi)


def rho_risk_reference(beta: np.ndarray, data: Dataset, spec: RiskSpec) -> float:
    a = (data.features @ beta > 0.0).astype(np.int64)
    return float(np.mean(spec.rho[data.labels, a]))


# ---------------------------------------------------------------------------
# exact grid posterior


@dataclass(frozen=True)
class GridPosterior:
    """Exhaustive discretization of the Gibbs posterior on a tiny instance.

    Atoms run over beta1, every model pattern within the size cap, and one
    grid cell per active coefficient. Cells partition the whole line (the
    outer cells extend to +/- infinity), so prior cell masses per pattern sum
    to one exactly and binned MCMC draws always land on an atom.
    """

    patterns: tuple  # tuple of tuples of non-anchor feature columns
    centers: np.ndarray  # (g,)
    edges: np.ndarray  # (g-1,) interior cell edges
    atom_beta1: np.ndarray
    atom_pattern: np.ndarray
    atom_cells: np.ndarray  # (m, max_d), -1 padding
    probs: np.ndarray
    log_prior_mass: np.ndarray
    risk_values: np.ndarray
    n_psi: float
    risk_kind: str

    @property
    def n_atoms(self) -> int:
        return self.probs.shape[0]

    def atom_beta(self, i: int, k: int) -> np.ndarray:
        beta = np.zeros(k)
        beta[0] = self.atom_beta1[i]
        cols = self.patterns[self.atom_pattern[i]]
        for t, col in enumerate(cols):
            beta[col] = self.centers[self.atom_cells[i, t]]
        return beta

    def mode(self) -> int:
        return int(np.argmax(self.probs))

    def _base_index(self):
        bases = {}
        offset = 0
        g = self.centers.shape[0]
        for pid, cols in enumerate(self.patterns):
            for b1 in (1.0, -1.0):
                bases[(b1, pid)] = offset
                offset += g ** len(cols)
        return bases

    def bin_chain(self, output) -> np.ndarray:
        """Empirical atom probabilities of a ChainOutput's retained draws."""
        pattern_ids = {cols: i for i, cols in enumerate(self.patterns)}
        bases = self._base_index()
        g = self.centers.shape[0]
        counts = np.zeros(self.n_atoms)
        for beta1, cols, vals in output.iter_draws():
            pid = pattern_ids[tuple(int(c) for c in cols)]
            flat = 0
            for v in vals:
                flat = flat * g + int(np.searchsorted(self.edges, v))
            counts[bases[(beta1, pid)] + flat] += 1.0
        return counts / max(output.n_kept, 1)

    def tv_to_chain(self, output) -> float:
        return 0.5 * float(np.sum(np.abs(self.probs - self.bin_chain(output))))

    def prior_probs(self) -> np.ndarray:
        lw = self.log_prior_mass - np.max(self.log_prior_mass)
        w = np.exp(lw)
        return w / w.sum()


def exact_grid_posterior(data: Dataset, risk: RiskSpec, prior: PriorSpec,
                         grid: tuple = (3.0, 21),
                         risk_kind: str = "smoothed") -> GridPosterior:
    """Enumerate the Gibbs posterior over (beta1, gamma, gridded coefficients).

    Guarded to toy sizes (K <= 4, rbar <= 3, g <= 41). ``risk_kind`` selects
    the smoothed sample risk (the Gibbs-backend target) or the unsmoothed
    loss-matrix risk (the Metropolis-backend target).
    """
    g_range, g_points = float(grid[0]), int(grid[1])
    if data.k > 4 or prior.rbar > 3 or g_points > 41:
        raise ValueError("grid posterior is capped at K <= 4, rbar <= 3, g <= 41")
    if g_points < 2:
        raise ValueError("need at least two grid points")
    if risk_kind not in ("smoothed", "unsmoothed"):
        raise ValueError("risk_kind must be 'smoothed' or 'unsmoothed'")

    centers = np.linspace(-g_range, g_range, g_points)
    edges = 0.5 * (centers[:-1] + centers[1:])
    # per-axis prior cell masses: CDF differences, outer cells to infinity
    cdf = ndtr(edges / math.sqrt(prior.v))
    cell_log_mass = np.log(np.diff(np.concatenate([[0.0], cdf, [1.0]])))

    patterns = []
    for size in range(0, min(prior.rbar - 1, data.k - 1) + 1):
        patterns.extend(itertools.combinations(range(1, data.k), size))
    patterns = tuple(patterns)

    max_d = max(len(p) for p in patterns)
    rows_beta1 = []
    rows_pattern = []
    rows_cells = []
    log_prior = []
    risks = []
    n_psi = data.n * risk.psi
    risk_fn = (smoothed_risk_reference if risk_kind == "smoothed"
               else rho_risk_reference)
    for pid, cols in enumerate(patterns):
        indicator = ModelIndicator.from_active(data.k, np.array(cols, dtype=np.int64))
        lp_model = log_prior_model(indicator, prior) + math.log(0.5)
        for b1 in (1.0, -1.0):
            for cells in itertools.product(range(g_points), repeat=len(cols)):
                beta = np.zeros(data.k)
                beta[0] = b1
                for t, col in enumerate(cols):
                    beta[col] = centers[cells[t]]
                lp = lp_model + sum(cell_log_mass[c] for c in cells)
                rows_beta1.append(b1)
                rows_pattern.append(pid)
                rows_cells.append(tuple(cells) + (-1,) * (max_d - len(cells)))
                log_prior.append(lp)
                risks.append(risk_fn(beta, data, risk))

    log_prior = np.array(log_prior)
    risks = np.array(risks)
    lw = log_prior - n_psi * risks
    lw -= np.max(lw)
    probs = np.exp(lw)
    probs /= probs.sum()
    return GridPosterior(patterns=patterns, centers=centers, edges=edges,
                         atom_beta1=np.array(rows_beta1),
                         atom_pattern=np.array(rows_pattern, dtype=np.int64),
                         atom_cells=np.array(rows_cells, dtype=np.int64).reshape(
                             len(rows_beta1), max_d),
                         probs=probs, log_prior_mass=log_prior,
                         risk_values=risks, n_psi=n_psi, risk_kind=risk_kind)


def gibbs_functional(gp: GridPosterior, masses: np.ndarray,
                     psi: float) -> float:
    """F(w) = sum w nR_n pi + psi^-1 KL(w pi, pi) evaluated on atom masses."""
    masses = np.asarray(masses, dtype=np.float64)
    if abs(masses.sum() - 1.0) > 1e-9 or np.any(masses < 0.0):
        raise ValueError("masses must be a probability vector")
    pri = gp.prior_probs()
    live = masses > 0.0
    n_risk = gp.n_psi / psi * gp.risk_values  # n * R_n
    kl = float(np.sum(masses[live] * np.log(masses[live] / pri[live])))
    return float(np.sum(masses * n_risk)) + kl / psi


def variational_check(gp: GridPosterior, psi: float, n_perturbations: int = 100,
                      seed: int = 7, tol: float = 1e-9) -> dict:
    """Check that the Gibbs posterior minimizes risk + psi^-1 KL on the grid.

    Compares F(gibbs) against the discretized prior and Dirichlet-perturbed
    candidate measures; returns the margins (all should be >= -tol).
    """
    f_gibbs = gibbs_functional(gp, gp.probs, psi)
    stream = Stream.from_seed(seed).derive(_rng.ORACLE).derive(0x41)
    margins = [gibbs_functional(gp, gp.prior_probs(), psi) - f_gibbs]
    for _ in range(n_perturbations):
        e = -np.log(stream.uniforms(gp.n_atoms))
        margins.append(gibbs_functional(gp, e / e.sum(), psi) - f_gibbs)
    worst = float(min(margins))
    return {"f_gibbs": f_gibbs, "worst_margin": worst, "ok": worst >= -tol,
            "n_checked": len(margins)}


# ---------------------------------------------------------------------------
# collapsed-marginal and quadrature oracles for the sampler steps


def collapsed_log_marginal(z: np.ndarray, data: Dataset, risk: RiskSpec,
                           prior: PriorSpec, indicator: ModelIndicator,
                           beta1: float) -> float:
    """log of pi(gamma) * 0.5 * N(Z - beta1 x1; 0, sigma^2 I + v Xg Xg').

    Dense n-by-n evaluation of the collapsed joint over (Z, beta1, gamma),
    independent of the sampler's d-by-d factorization route.
    """
    lp = log_prior_model(indicator, prior) + math.log(0.5)
    if lp == float("-inf"):
        return lp
    zb = np.asarray(z, dtype=np.float64) - beta1 * data.features[:, 0]
    xg = data.features[:, indicator.active]
    cov = risk.sigma_n ** 2 * np.eye(data.n) + prior.v * (xg @ xg.T)
    return lp + float(stats.multivariate_normal.logpdf(zb, mean=None, cov=cov))


def marginalize_latents_quadrature(beta: np.ndarray, data: Dataset,
                                   risk: RiskSpec) -> float:
    """log prod_i Int N(z; x_i'beta, sigma^2) p_{I[z>0]}-likelihood dz by
    adaptive quadrature; equals -n psi R_n when the augmentation is right."""
    m = data.features @ beta
    sig = risk.sigma_n
    total = 0.0
    for i in range(data.n):
        if data.labels[i] == 1:
            a1, a0 = risk.p1, risk.p0
        else:
            a1, a0 = 1.0 - risk.p1, 1.0 - risk.p0

        def dens(zv, mi=m[i]):
            return math.exp(-0.5 * ((zv - mi) / sig) ** 2) / (sig * math.sqrt(2 * math.pi))

        neg, _ = integrate.quad(dens, -np.inf, 0.0, epsabs=1e-14, epsrel=1e-12)
        pos, _ = integrate.quad(dens, 0.0, np.inf, epsabs=1e-14, epsrel=1e-12)
        total += math.log(a1 * pos + a0 * neg)
    return total


# ---------------------------------------------------------------------------
# search and baselines


def screen_columns(data: Dataset, top: int) -> np.ndarray:
    """Non-anchor columns ranked by |corr(x_j, y)|, strongest first."""
    y = data.labels - data.labels.mean()
    x = data.features[:, 1:]
    xc = x - x.mean(axis=0)
    denom = np.sqrt(np.sum(xc ** 2, axis=0) * np.sum(y ** 2)) + 1e-300
    scores = np.abs(xc.T @ y) / denom
    order = np.argsort(-scores, kind="stable")[:top]
    return order + 1


def best_sparse_rule(data: Dataset, budget: int, grid: tuple = (1.5, 13),
                     pool: np.ndarray | None = None, eval_fn=None,
                     guard: int = 10 ** 7):
    """Exhaustive best rule over supports of <= ``budget`` non-anchor columns.

    The anchor is always in; coefficients range over a symmetric grid.
    ``eval_fn(beta) -> risk`` may replace the default empirical 0/1 risk
    (e.g. an exact analytic risk). Enumeration cost is guarded.

    Returns (assembled beta, risk); ties resolve to the sparsest, earliest
    candidate, so a perfect anchor-only rule wins outright.
    """
    g_range, g_points = float(grid[0]), int(grid[1])
    if pool is None:
        pool = np.arange(1, data.k, dtype=np.int64)
    pool = np.asarray(pool, dtype=np.int64)
    cost = sum(math.comb(len(pool), s) * g_points ** s
               for s in range(0, budget + 1))
    if cost > guard:
        raise ValueError(f"search size {cost} exceeds the {guard} guard")

    levels = np.linspace(-g_range, g_range, g_points)
    y = data.labels
    x1 = data.features[:, 0]
    best_beta = None
    best_risk = math.inf
    for size in range(0, budget + 1):
        for cols in itertools.combinations(pool.tolist(), size):
            cols = np.array(cols, dtype=np.int64)
            if size:
                coefs = np.stack([a.ravel() for a in
                                  np.meshgrid(*([levels] * size), indexing="ij")],
                                 axis=1)
            else:
                coefs = np.zeros((1, 0))
            for b1 in (1.0, -1.0):
                if eval_fn is None:
                    mg = b1 * x1[:, None] + data.features[:, cols] @ coefs.T
                    risks = np.mean((mg > 0.0) != y[:, None], axis=0)
                    j = int(np.argmin(risks))
                    cand_risk = float(risks[j])
                    cand = coefs[j]
                else:
                    cand_risk = math.inf
                    cand = None
                    for row in coefs:
                        beta = np.zeros(data.k)
                        beta[0] = b1
                        beta[cols] = row
                        r = eval_fn(beta)
                        if r < cand_risk:
                            cand_risk = r
                            cand = row
                if cand_risk < best_risk - 1e-15:
                    best_risk = cand_risk
                    best_beta = np.zeros(data.k)
                    best_beta[0] = b1
                    best_beta[cols] = cand
    return best_beta, best_risk


def logistic_mle_baseline(data: Dataset, ridge: float = 1e-8,
                          max_iter: int = 100, tol: float = 1e-10):
    """Ridge-stabilised IRLS logistic fit; classifier is I[p > 0.5].

    Returns (coefficients, converged flag). The feature matrix is used as-is;
    generators that want an intercept carry a constant column.
    """
    x = data.features
    y = data.labels.astype(np.float64)
    beta = np.zeros(data.k)
    converged = False
    for _ in range(max_iter):
        eta = x @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = np.maximum(p * (1.0 - p), 1e-12)
        h = (x.T * w) @ x + ridge * np.eye(data.k)
        grad = x.T @ (y - p) - ridge * beta
        step = np.linalg.solve(h, grad)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    return beta, converged


def no_selection_experiment(k: int, n: int, seed: int, draws: int = 200_000,
                            chunk: int = 20_000) -> dict:
    """Estimate the overall misclassification of a coordinate-symmetric prior
    that is never updated off the observed one-hot coordinates.

    A future observation whose coordinate was unseen in training is classified
    by an un-updated symmetric coefficient, i.e. a fair coin; seen coordinates
    use a fixed perfect on-support rule. The estimate is compared against the
    0.5 * (1 - n/K) floor.
    """
    if not k > n:
        raise ValueError("the no-selection bound needs K > n")
    stream = Stream.from_seed(seed).derive(_rng.ORACLE).derive(0x51)
    errors = 0
    done = 0
    while done < draws:
        b = min(chunk, draws - done)
        train = (stream.uniforms(b * n).reshape(b, n) * k).astype(np.int64)
        future = (stream.uniforms(b) * k).astype(np.int64)
        coin = stream.uniforms(b) < 0.5
        unseen = ~np.any(train == future[:, None], axis=1)
        errors += int(np.count_nonzero(unseen & coin))
        done += b
    est = errors / draws
    se = math.sqrt(max(est * (1.0 - est), 1e-12) / draws)
    bound = 0.5 * (1.0 - n / k)
    return {"estimate": est, "se": se, "bound": bound, "draws": draws,
            "meets_bound": est >= bound - 3.0 * se}
