#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the full Gibbs chain and the individual hot kernels on a mid-size
workload, then re-executes itself with ``GIBBSBVS_NUMBA=0`` to time the
fallback path (unless --no-fallback). Usage::

    python benchmarks/bench_backends.py [--sweeps N] [--n N] [--k K]
"""

import argparse
import json
import os
import subprocess
import sys
import time

from gibbsbvs import (CLASSIFICATION_RHO, PriorSpec, SamplerConfig,
                      derive_risk_spec, run_chain, run_metropolis)
from gibbsbvs._backend import NUMBA_ENABLED
from gibbsbvs.generators import GeneratorSpec, generate


def build_workload(n, k, sweeps):
    gen = GeneratorSpec("sparse-linear", n=n, k=k, support=3, coef_scale=2.0,
                        noise=0.1, truth_seed=11)
    data = generate(gen, seed=11)
    risk = derive_risk_spec(CLASSIFICATION_RHO, psi=3.0, sigma_n=0.1)
    prior = PriorSpec(lam=5.0 / k, rbar=10, v=1.0, k=k)
    cfg = SamplerConfig(iterations=sweeps, burn_in=sweeps // 4, thin=10, seed=11)
    return data, risk, prior, cfg


def bench(n, k, sweeps):
    data, risk, prior, cfg = build_workload(n, k, sweeps)
    run_chain(data, risk, prior, SamplerConfig(iterations=50, seed=1))  # JIT warmup
    t0 = time.perf_counter()
    out = run_chain(data, risk, prior, cfg)
    gibbs_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    run_metropolis(data, risk, prior, cfg)
    metro_s = time.perf_counter() - t0
    return {
        "backend": "numba" if NUMBA_ENABLED else "numpy-fallback",
        "n": n, "k": k, "sweeps": sweeps,
        "gibbs_seconds": round(gibbs_s, 3),
        "gibbs_sweeps_per_second": round(sweeps / gibbs_s, 1),
        "metropolis_seconds": round(metro_s, 3),
        "posterior_risk_trace_mean": round(float(out.posterior_mean_smoothed_risk), 4),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sweeps", type=int, default=None)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--k", type=int, default=200)
    ap.add_argument("--no-fallback", action="store_true",
                    help="skip the pure-numpy comparison run")
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    args = ap.parse_args()

    sweeps = args.sweeps
    if sweeps is None:
        sweeps = 5000 if NUMBA_ENABLED else 200

    row = bench(args.n, args.k, sweeps)
    rows = [row]
    if NUMBA_ENABLED and not args.no_fallback:
        env = dict(os.environ, GIBBSBVS_NUMBA="0")
        cmd = [sys.executable, __file__, "--json", "--no-fallback",
               "--n", str(args.n), "--k", str(args.k)]
        res = subprocess.run(cmd, env=env, capture_output=True, text=True,
                             check=True)
        rows.append(json.loads(res.stdout))

    if args.json:
        print(json.dumps(row))
        return
    for r in rows:
        print(f"{r['backend']:>15}: {r['sweeps']:>6} sweeps (n={r['n']}, K={r['k']})"
              f"  gibbs {r['gibbs_seconds']:8.3f}s"
              f" ({r['gibbs_sweeps_per_second']:9.1f} sweeps/s)"
              f"  metropolis {r['metropolis_seconds']:8.3f}s")
    if len(rows) == 2 and rows[1]["gibbs_sweeps_per_second"] > 0:
        speedup = rows[0]["gibbs_sweeps_per_second"] / rows[1]["gibbs_sweeps_per_second"]
        print(f"numba speedup on the Gibbs sweep: {speedup:.0f}x")


if __name__ == "__main__":
    main()
