"""Numba-compiled numeric kernels.

Everything here is written to compile under ``numba.njit`` and to run
unchanged as pure Python/numpy when the backend is disabled (see
:mod:`gibbsbvs._backend`). Kernels take raw arrays plus an explicit uint64
stream key; all randomness flows through the counter-based generator below so
results are reproducible for a fixed seed on either backend.

RNG scheme (SplitMix64 in counter mode):
  - ``stream_u64(key, i)`` is the i-th raw draw of the stream named ``key``.
  - ``derive_key(key, tag)`` names a substream; the sampler derives
    per-(chain, sweep, step, coordinate) keys so that variable-length
    rejection loops in one coordinate never shift the draws of another.
"""

import math

import numpy as np

from ._backend import njit

U64 = np.uint64

_GAMMA = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D4A2C62CA67CC5)
_KEYSALT = U64(0xD1B54A32D192ED03)
_S30 = U64(30)
_S27 = U64(27)
_S31 = U64(31)
_S11 = U64(11)
_ONE = U64(1)

_INV53 = 2.0 ** -53
_SQRT2 = math.sqrt(2.0)

# Switch point between inverse-CDF and Marsaglia tail sampling for one-sided
# truncated normals; erfc is still ~6e-16 at 8 so the inverse CDF is exact
# below it.
_TAIL_SPLIT = 8.0


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def derive_key(key, tag):
    return mix64(key ^ ((tag + _ONE) * _KEYSALT))


@njit(cache=True)
def stream_u64(key, ctr):
    return mix64(key + (ctr + _ONE) * _GAMMA)


@njit(cache=True)
def u01(key, ctr):
    # (0, 1): never 0/1 exactly, so logs and quantiles are safe.
    return (np.float64(stream_u64(key, ctr) >> _S11) + 0.5) * _INV53


@njit(cache=True)
def std_norm_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit(cache=True)
def norm_ppf(p):
    """Standard normal quantile, Wichura's AS 241 (PPND16, |err| ~ 1e-16)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    if q < 0.0:
        val = -val
    return val


@njit(cache=True)
def norm_draw(key, ctr):
    return norm_ppf(u01(key, ctr))


@njit(cache=True)
def trunc_norm_upper(key, ctr, a):
    """Draw a standard normal conditioned on exceeding ``a``.

    Returns (value, next counter). Inverse CDF below _TAIL_SPLIT; Marsaglia
    tail rejection beyond it (the upper-tail CDF underflows around 37).
    """
    if a < _TAIL_SPLIT:
        tail = 0.5 * math.erfc(a / _SQRT2)
        v = u01(key, ctr) * tail
        return -norm_ppf(v), ctr + _ONE
    while True:
        x = math.sqrt(a * a - 2.0 * math.log(u01(key, ctr)))
        accept = u01(key, ctr + _ONE) * x <= a
        ctr = ctr + U64(2)
        if accept:
            return x, ctr


@njit(cache=True)
def sigmoid(delta):
    if delta >= 0.0:
        return 1.0 / (1.0 + math.exp(-delta))
    e = math.exp(delta)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# risk kernels


@njit(cache=True)
def rule_margins(x1, xtt, beta1, idx, d, vals):
    """Margins x'beta for beta1 on the anchor plus d active non-anchor coords.

    ``xtt`` is the (K-1, n) transposed non-anchor feature block; ``idx``
    holds 0-based non-anchor row indices.
    """
    n = x1.shape[0]
    m = np.empty(n)
    for i in range(n):
        m[i] = beta1 * x1[i]
    for t in range(d):
        row = idx[t]
        c = vals[t]
        for i in range(n):
            m[i] += c * xtt[row, i]
    return m


@njit(cache=True)
def smoothed_risk(m, y, p0, p1, p0_bar, p1_bar, psi, sigma):
    """Smoothed sample risk: -(n*psi)^-1 sum log mixture-Bernoulli terms.

    Both brackets are sums of positive terms (the y = 0 branch uses the
    complementary CDF and the complementary mixture weights), so the log never
    sees cancellation even for extreme margins or sharp losses.
    """
    n = m.shape[0]
    acc = 0.0
    for i in range(n):
        t = m[i] / (sigma * _SQRT2)
        if y[i] == 1:
            phi = 0.5 * math.erfc(-t)
            acc += math.log(p0 + phi * (p1 - p0))
        else:
            phi_c = 0.5 * math.erfc(t)
            acc += math.log(p1_bar + phi_c * (p0_bar - p1_bar))
    return -acc / (n * psi)


@njit(cache=True)
def rho_risk(m, y, r00, r01, r10, r11):
    """Unsmoothed empirical loss-matrix risk; boundary x'beta = 0 acts as 0."""
    n = m.shape[0]
    acc = 0.0
    for i in range(n):
        if m[i] > 0.0:
            acc += r11 if y[i] == 1 else r01
        else:
            acc += r10 if y[i] == 1 else r00
    return acc / n


@njit(cache=True)
def rho_risk_shifted(m, col, coef, y, r00, r01, r10, r11):
    """rho_risk of margins m + coef*col without materialising the shift."""
    n = m.shape[0]
    acc = 0.0
    for i in range(n):
        mi = m[i] + coef * col[i]
        if mi > 0.0:
            acc += r11 if y[i] == 1 else r01
        else:
            acc += r10 if y[i] == 1 else r00
    return acc / n


# ---------------------------------------------------------------------------
# small SPD linear algebra (d <= rbar, so plain loops beat LAPACK here)


@njit(cache=True)
def chol_lower(s):
    """Cholesky of a small SPD matrix; returns (L, ok)."""
    d = s.shape[0]
    lo = np.zeros((d, d))
    for j in range(d):
        acc = s[j, j]
        for k in range(j):
            acc -= lo[j, k] * lo[j, k]
        if acc <= 0.0 or not math.isfinite(acc):
            return lo, False
        lo[j, j] = math.sqrt(acc)
        for i in range(j + 1, d):
            w = s[i, j]
            for k in range(j):
                w -= lo[i, k] * lo[j, k]
            lo[i, j] = w / lo[j, j]
    return lo, True


@njit(cache=True)
def chol_solve(lo, rhs):
    """Solve (L L') x = rhs via two triangular solves."""
    d = lo.shape[0]
    x = np.empty(d)
    for i in range(d):
        w = rhs[i]
        for k in range(i):
            w -= lo[i, k] * x[k]
        x[i] = w / lo[i, i]
    for i in range(d - 1, -1, -1):
        w = x[i]
        for k in range(i + 1, d):
            w -= lo[k, i] * x[k]
        x[i] = w / lo[i, i]
    return x


@njit(cache=True)
def build_sgamma_matrix(gram, idx, d, ridge):
    s = np.empty((d, d))
    for a in range(d):
        ia = idx[a]
        for b in range(d):
            s[a, b] = gram[ia, idx[b]]
        s[a, a] += ridge
    return s


@njit(cache=True)
def factor_sgamma(gram, idx, d, ridge):
    """Factor S = ridge*I + gram[idx, idx]; one jitter retry, then give up."""
    s = build_sgamma_matrix(gram, idx, d, ridge)
    lo, ok = chol_lower(s)
    if not ok and d > 0:
        tr = 0.0
        for a in range(d):
            tr += s[a, a]
        jit = 1e-10 * tr / d
        for a in range(d):
            s[a, a] += jit
        lo, ok = chol_lower(s)
    return lo, ok


@njit(cache=True)
def model_stats(gram, c, idx, d, ridge):
    """(quadratic form c_idx' S^-1 c_idx, logdet S, ok) for the model idx[:d].

    The quadratic form only needs the forward solve: |L^-1 b|^2.
    """
    if d == 0:
        return 0.0, 0.0, True
    lo, ok = factor_sgamma(gram, idx, d, ridge)
    if not ok:
        return 0.0, 0.0, False
    fwd = np.empty(d)
    qf = 0.0
    logdet = 0.0
    for i in range(d):
        w = c[idx[i]]
        for k in range(i):
            w -= lo[i, k] * fwd[k]
        fwd[i] = w / lo[i, i]
        qf += fwd[i] * fwd[i]
        logdet += math.log(lo[i, i])
    return qf, 2.0 * logdet, True


# ---------------------------------------------------------------------------
# sampler steps


@njit(cache=True)
def step1_mixture(m, y, p0, p1, p0_bar, p1_bar, sigma, key):
    """Exact draw of every latent Z_i from its full conditional.

    Chooses the positive side with probability a1*Phi / (a1*Phi + a0*(1-Phi))
    and then draws the matching one-sided truncated normal.
    """
    n = m.shape[0]
    z = np.empty(n)
    for i in range(n):
        # U64 re-wrap keeps the key a uint64 when this body runs un-jitted
        ki = U64(derive_key(key, U64(i)))
        if y[i] == 1:
            a1 = p1
            a0 = p0
        else:
            a1 = p1_bar
            a0 = p0_bar
        alpha = -m[i] / sigma
        phi_pos = 0.5 * math.erfc(alpha / _SQRT2)
        phi_neg = 0.5 * math.erfc(-alpha / _SQRT2)
        w_pos = a1 * phi_pos / (a1 * phi_pos + a0 * phi_neg)
        if u01(ki, U64(0)) < w_pos:
            zeta, _ = trunc_norm_upper(ki, _ONE, alpha)
            z[i] = m[i] + sigma * zeta
        else:
            zeta, _ = trunc_norm_upper(ki, _ONE, -alpha)
            z[i] = m[i] - sigma * zeta
    return z


@njit(cache=True)
def step1_rejection(m, y, p0, p1, p0_bar, p1_bar, sigma, key, max_tries):
    """Retry-until-accept variant: propose N(m_i, sigma^2), thin by a_+/a_-."""
    n = m.shape[0]
    z = np.empty(n)
    for i in range(n):
        ki = U64(derive_key(key, U64(i)))
        if y[i] == 1:
            a1 = p1
            a0 = p0
        else:
            a1 = p1_bar
            a0 = p0_bar
        amax = a1 if a1 > a0 else a0
        acc_pos = a1 / amax
        acc_neg = a0 / amax
        ctr = U64(0)
        accepted = False
        for _ in range(max_tries):
            zstar = m[i] + sigma * norm_ppf(u01(ki, ctr))
            ustar = u01(ki, ctr + _ONE)
            ctr = ctr + U64(2)
            thresh = acc_pos if zstar > 0.0 else acc_neg
            if ustar <= thresh:
                z[i] = zstar
                accepted = True
                break
        if not accepted:
            return z, False
    return z, True


@njit(cache=True)
def sign_log_weights(gram, t0, t1, zz, zx1, x1x1, idx, d, ridge, sigma2):
    """Log weights (up to a shared constant) of beta1 = +1 / -1 given (Z, gamma).

    lw(s) = 0.5/sigma^2 * (qf_s - |Z - s*x1|^2) with qf_s the quadratic form
    through S_gamma at c_s = Xt'Z - s * Xt'x1.
    """
    b = np.empty(d)
    for t in range(d):
        b[t] = t0[idx[t]] - t1[idx[t]]
    qf_p, _, ok_p = model_stats_direct(gram, b, idx, d, ridge)
    for t in range(d):
        b[t] = t0[idx[t]] + t1[idx[t]]
    qf_m, _, ok_m = model_stats_direct(gram, b, idx, d, ridge)
    lw_p = 0.5 / sigma2 * (qf_p - (zz - 2.0 * zx1 + x1x1))
    lw_m = 0.5 / sigma2 * (qf_m - (zz + 2.0 * zx1 + x1x1))
    return lw_p, lw_m, ok_p and ok_m


@njit(cache=True)
def model_stats_direct(gram, b, idx, d, ridge):
    """model_stats with the projected rhs b (length d) supplied directly."""
    if d == 0:
        return 0.0, 0.0, True
    lo, ok = factor_sgamma(gram, idx, d, ridge)
    if not ok:
        return 0.0, 0.0, False
    fwd = np.empty(d)
    qf = 0.0
    logdet = 0.0
    for i in range(d):
        w = b[i]
        for k in range(i):
            w -= lo[i, k] * fwd[k]
        fwd[i] = w / lo[i, i]
        qf += fwd[i] * fwd[i]
        logdet += math.log(lo[i, i])
    return qf, 2.0 * logdet, True


@njit(cache=True)
def step2a_sample(gram, t0, t1, zz, zx1, x1x1, idx, d, ridge, sigma2, key):
    lw_p, lw_m, ok = sign_log_weights(gram, t0, t1, zz, zx1, x1x1, idx, d,
                                      ridge, sigma2)
    p_plus = sigmoid(lw_p - lw_m)
    beta1 = 1.0 if u01(key, U64(0)) < p_plus else -1.0
    return beta1, ok


@njit(cache=True)
def branch_log_weight(gram, c, idx, d, gj, lnlam, ln1mlam, ridge, sigma2,
                      ln_v_over_sig2):
    """Unnormalised log weight of one gamma_j branch in the indicator sweep.

    Includes the j-th prior factor, the quadratic form, and the determinant
    term -0.5*(logdet S + d*ln(v/sigma^2)); the shared -0.5|Z(b1)|^2/sigma^2
    is dropped.
    """
    qf, logdet, ok = model_stats(gram, c, idx, d, ridge)
    prior = lnlam if gj == 1 else ln1mlam
    lw = prior + 0.5 / sigma2 * qf - 0.5 * (logdet + d * ln_v_over_sig2)
    return lw, ok


@njit(cache=True)
def step2b_sweep(gram, c, gamma, idx, d, max_active, lnlam, ln1mlam, ridge,
                 sigma2, ln_v_over_sig2, scan, key):
    """One systematic/random-scan pass over all non-anchor indicators.

    Mutates ``gamma`` (bool, K-1) and ``idx`` (int64 capacity >= max_active)
    in place; returns (new d, number of flips, ok). A branch that would break
    the size cap gets probability zero.
    """
    qf, logdet, ok = model_stats(gram, c, idx, d, ridge)
    if not ok:
        return d, 0, False
    cur_base = 0.5 / sigma2 * qf - 0.5 * (logdet + d * ln_v_over_sig2)
    flips = 0
    cand = np.empty(max_active + 1, dtype=np.int64)
    for s in range(scan.shape[0]):
        j = scan[s]
        gj = gamma[j]
        if gj:
            # candidate removes j
            pos = 0
            for t in range(d):
                if idx[t] != j:
                    cand[pos] = idx[t]
                    pos += 1
            cand_d = d - 1
        else:
            if d + 1 > max_active:
                continue  # gamma_j = 1 branch has probability 0
            for t in range(d):
                cand[t] = idx[t]
            cand[d] = j
            cand_d = d + 1
        qf, logdet, ok = model_stats(gram, c, cand, cand_d, ridge)
        if not ok:
            return d, flips, False
        cand_base = 0.5 / sigma2 * qf - 0.5 * (logdet + cand_d * ln_v_over_sig2)
        if gj:
            lw1 = cur_base + lnlam
            lw0 = cand_base + ln1mlam
        else:
            lw1 = cand_base + lnlam
            lw0 = cur_base + ln1mlam
        p_one = sigmoid(lw1 - lw0)
        new_gj = u01(key, U64(s)) < p_one
        if new_gj != gj:
            flips += 1
            gamma[j] = new_gj
            for t in range(cand_d):
                idx[t] = cand[t]
            d = cand_d
            cur_base = cand_base
    return d, flips, True


@njit(cache=True)
def step3_draw(gram, c, idx, d, ridge, sigma, key):
    """Draw active coefficients ~ N(S^-1 Xt'Z(b1), sigma^2 S^-1)."""
    vals = np.empty(d)
    if d == 0:
        return vals, True
    lo, ok = factor_sgamma(gram, idx, d, ridge)
    if not ok:
        return vals, False
    b = np.empty(d)
    for t in range(d):
        b[t] = c[idx[t]]
    mean = chol_solve(lo, b)
    xi = np.empty(d)
    for t in range(d):
        xi[t] = norm_draw(key, U64(t))
    # covariance sigma^2 (L L')^-1: solve L' eta = xi
    for i in range(d - 1, -1, -1):
        w = xi[i]
        for k in range(i + 1, d):
            w -= lo[k, i] * xi[k]
        xi[i] = w / lo[i, i]
    for t in range(d):
        vals[t] = mean[t] + sigma * xi[t]
    return vals, True


# ---------------------------------------------------------------------------
# Metropolis backend on the unsmoothed risk


@njit(cache=True)
def metropolis_run(x1, xtt, y, r00, r01, r10, r11, n_psi, lam, v, max_active,
                   n_iter, burn_in, thin, p_toggle, p_perturb, step_scale,
                   p0, p1, p0_bar, p1_bar, psi, sigma, key,
                   trace_size, trace_risk, trace_beta1, trace_acc,
                   kept_beta1, kept_d, kept_idx, kept_vals):
    """Random-walk/birth-death Metropolis targeting exp(-n*psi*R_n^(i)) * prior.

    Moves: toggle one indicator (birth draws the coefficient from its prior,
    so the Gaussian factor cancels in the ratio), perturb one active
    coefficient, or flip beta1. Fills the supplied trace/draw buffers and
    returns (number of retained draws, accepted count).
    """
    n = x1.shape[0]
    kdim = xtt.shape[0]
    lnlam_ratio = math.log(lam) - math.log(1.0 - lam)
    sqv = math.sqrt(v)

    beta1 = 1.0
    d = 0
    idx = np.empty(max_active, dtype=np.int64)
    vals = np.empty(max_active)
    m = np.empty(n)
    for i in range(n):
        m[i] = beta1 * x1[i]
    risk = rho_risk(m, y, r00, r01, r10, r11)

    kept = 0
    accepted_total = 0
    for it in range(n_iter):
        kt = U64(derive_key(key, U64(it)))
        u_move = u01(kt, U64(0))
        accept = False
        if u_move < p_toggle:
            j = int(u01(kt, _ONE) * kdim)
            if j >= kdim:
                j = kdim - 1
            pos = -1
            for t in range(d):
                if idx[t] == j:
                    pos = t
                    break
            if pos < 0:
                # birth
                if d + 1 <= max_active:
                    b = sqv * norm_draw(kt, U64(2))
                    new_risk = rho_risk_shifted(m, xtt[j], b, y,
                                                r00, r01, r10, r11)
                    delta = -n_psi * (new_risk - risk) + lnlam_ratio
                    if math.log(u01(kt, U64(3))) < delta:
                        accept = True
                        idx[d] = j
                        vals[d] = b
                        d += 1
                        risk = new_risk
                        for i in range(n):
                            m[i] += b * xtt[j, i]
            else:
                # death
                b = vals[pos]
                new_risk = rho_risk_shifted(m, xtt[j], -b, y,
                                            r00, r01, r10, r11)
                delta = -n_psi * (new_risk - risk) - lnlam_ratio
                if math.log(u01(kt, U64(3))) < delta:
                    accept = True
                    idx[pos] = idx[d - 1]
                    vals[pos] = vals[d - 1]
                    d -= 1
                    risk = new_risk
                    for i in range(n):
                        m[i] -= b * xtt[j, i]
        elif u_move < p_toggle + p_perturb:
            if d > 0:
                t = int(u01(kt, _ONE) * d)
                if t >= d:
                    t = d - 1
                b_old = vals[t]
                b_new = b_old + step_scale * norm_draw(kt, U64(2))
                j = idx[t]
                new_risk = rho_risk_shifted(m, xtt[j], b_new - b_old, y,
                                            r00, r01, r10, r11)
                delta = (-n_psi * (new_risk - risk)
                         - (b_new * b_new - b_old * b_old) / (2.0 * v))
                if math.log(u01(kt, U64(3))) < delta:
                    accept = True
                    vals[t] = b_new
                    risk = new_risk
                    for i in range(n):
                        m[i] += (b_new - b_old) * xtt[j, i]
        else:
            new_risk = rho_risk_shifted(m, x1, -2.0 * beta1, y,
                                        r00, r01, r10, r11)
            delta = -n_psi * (new_risk - risk)
            if math.log(u01(kt, _ONE)) < delta:
                accept = True
                for i in range(n):
                    m[i] -= 2.0 * beta1 * x1[i]
                beta1 = -beta1
                risk = new_risk
        if accept:
            accepted_total += 1
        trace_size[it] = d + 1
        trace_risk[it] = smoothed_risk(m, y, p0, p1, p0_bar, p1_bar, psi, sigma)
        trace_beta1[it] = beta1
        trace_acc[it] = 1 if accept else 0
        if it >= burn_in and (it - burn_in) % thin == 0:
            kept_beta1[kept] = beta1
            kept_d[kept] = d
            for t in range(d):
                kept_idx[kept, t] = idx[t]
                kept_vals[kept, t] = vals[t]
            kept += 1
    return kept, accepted_total
