"""Batch experiment harness.

An experiment is a JSON config resolving to (generator, risk, prior, sampler,
evaluation); ``run_experiment`` writes a config echo, the condition report, a
chain trace CSV and a summary JSON into the output directory, all
byte-reproducible for a fixed config and seed.

Config schema (defaults in brackets)::

    {
      "name": str,
      "generator": {"kind": "misspecified-logistic" | "indicator-grid" |
                     "sparse-linear" | "file",
                    ... per-kind fields: lam, n, k, support, coef_scale,
                        noise, path, label_column},
      "risk": {"rho": 2x2 [classification], "psi": float [1.0],
               "sigma_n": float | "sigma_rule": "sqrt(log n / n)" [rule]},
      "prior": {"v": float [1.0], "lambda": float, "rbar": int,
                "delta_n": float},          # lambda/rbar absent -> auto (r_delta)
      "sampler": {"backend": "gibbs" | "metropolis" ["gibbs"],
                  "iterations": int, "burn_in": int [0], "thin": int [1],
                  "scan_order": str, "z_update": str},
      "evaluation": {"analytic": bool [false], "holdout": int [0],
                     "mle_baseline": bool [false], "psi_grid": [floats] []},
      "seed": int
    }

Exit codes: 0 success, 2 config error, 3 criterion failure, 4 numeric abort.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import (CLASSIFICATION_RHO, auto_prior_spec, derive_risk_spec,
                   Dataset, PriorSpec, RiskSpec, validate_conditions)
from .generators import GeneratorSpec, finite_support, generate
from .oracle import logistic_mle_baseline
from .risk import population_risk_analytic
from .sampler import ChainOutput, SamplerConfig, run_chain
from .suites import SUITES

__all__ = ["ConfigError", "resolve_config", "run_experiment", "run_suite", "main"]

_SIGMA_RULE = "sqrt(log n / n)"


class ConfigError(ValueError):
    pass


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _config_hash(obj) -> str:
    return hashlib.sha256(_canonical_json(obj).encode()).hexdigest()[:16]


@dataclass
class ResolvedExperiment:
    name: str
    seed: int
    gen_spec: GeneratorSpec
    data: Dataset
    risk: RiskSpec
    prior: PriorSpec
    sampler: SamplerConfig
    evaluation: dict
    delta_n: float | None
    echo: dict


def resolve_config(cfg: dict, seed_override: int | None = None) -> ResolvedExperiment:
    """Validate a config object and materialise the module-level specs."""
    try:
        seed = int(seed_override if seed_override is not None else cfg["seed"])
        name = str(cfg.get("name", "experiment"))

        g = dict(cfg["generator"])
        kind = g.pop("kind")
        lam = g.pop("lam", 0.125)
        gen_spec = GeneratorSpec(kind=kind, n=int(g.pop("n", 0)), lam=lam,
                                 k=int(g.pop("k", 2)),
                                 support=int(g.pop("support", 0)),
                                 coef_scale=float(g.pop("coef_scale", 1.0)),
                                 noise=float(g.pop("noise", 0.0)),
                                 truth_seed=int(g.pop("truth_seed", seed)),
                                 path=str(g.pop("path", "")),
                                 label_column=str(g.pop("label_column", "")))
        if g:
            raise ConfigError(f"unknown generator keys: {sorted(g)}")
        data = generate(gen_spec, seed=seed)

        r = dict(cfg.get("risk", {}))
        rho = r.pop("rho", CLASSIFICATION_RHO)
        psi = float(r.pop("psi", 1.0))
        if "sigma_n" in r:
            sigma_n = float(r.pop("sigma_n"))
            r.pop("sigma_rule", None)
        else:
            rule = r.pop("sigma_rule", _SIGMA_RULE)
            if rule != _SIGMA_RULE:
                raise ConfigError(f"unknown sigma rule {rule!r}")
            sigma_n = float(np.sqrt(np.log(data.n) / data.n))
        if r:
            raise ConfigError(f"unknown risk keys: {sorted(r)}")
        risk = derive_risk_spec(rho, psi=psi, sigma_n=sigma_n)

        p = dict(cfg.get("prior", {}))
        v = float(p.pop("v", 1.0))
        delta_n = p.pop("delta_n", None)
        delta_n = float(delta_n) if delta_n is not None else None
        if "lambda" in p or "rbar" in p:
            prior = PriorSpec(lam=float(p.pop("lambda")), rbar=int(p.pop("rbar")),
                              v=v, k=data.k)
        else:
            prior = auto_prior_spec(data.n, data.k, v=v, delta_n=delta_n)
        if p:
            raise ConfigError(f"unknown prior keys: {sorted(p)}")

        s = dict(cfg.get("sampler", {}))
        sampler = SamplerConfig(iterations=int(s.pop("iterations", 10_000)),
                                burn_in=int(s.pop("burn_in", 0)),
                                thin=int(s.pop("thin", 1)),
                                scan_order=s.pop("scan_order", "systematic"),
                                z_update=s.pop("z_update", "exact-mixture"),
                                backend=s.pop("backend", "gibbs"),
                                seed=seed)
        if s:
            raise ConfigError(f"unknown sampler keys: {sorted(s)}")

        ev = dict(cfg.get("evaluation", {}))
        evaluation = {"analytic": bool(ev.pop("analytic", False)),
                      "holdout": int(ev.pop("holdout", 0)),
                      "mle_baseline": bool(ev.pop("mle_baseline", False)),
                      "psi_grid": [float(x) for x in ev.pop("psi_grid", [])],
                      "oracle_budget": int(ev.pop("oracle_budget", 0))}
        if ev:
            raise ConfigError(f"unknown evaluation keys: {sorted(ev)}")
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    echo = {"name": name, "seed": seed,
            "generator": {"kind": gen_spec.kind, "n": gen_spec.n,
                          "lam": gen_spec.lam, "k": gen_spec.k,
                          "support": gen_spec.support,
                          "coef_scale": gen_spec.coef_scale,
                          "noise": gen_spec.noise,
                          "truth_seed": gen_spec.truth_seed,
                          "path": gen_spec.path,
                          "label_column": gen_spec.label_column},
            "risk": {"rho": np.asarray(risk.rho).tolist(), "psi": risk.psi,
                     "sigma_n": risk.sigma_n},
            "prior": {"lambda": prior.lam, "rbar": prior.rbar, "v": prior.v,
                      "delta_n": delta_n},
            "sampler": {"backend": sampler.backend,
                        "iterations": sampler.iterations,
                        "burn_in": sampler.burn_in, "thin": sampler.thin,
                        "scan_order": sampler.scan_order,
                        "z_update": sampler.z_update},
            "evaluation": evaluation}
    return ResolvedExperiment(name=name, seed=seed, gen_spec=gen_spec, data=data,
                              risk=risk, prior=prior, sampler=sampler,
                              evaluation=evaluation, delta_n=delta_n, echo=echo)


def _posterior_mean_rule_risk(output: ChainOutput, eval_fn) -> float:
    return output.mean_rule_metric(eval_fn)


def _rule_eval_from(exp: ResolvedExperiment):
    """(label, per-draw rule evaluator) pair, or (None, None)."""
    if exp.evaluation["analytic"]:
        weights, feats, labels = finite_support(exp.gen_spec)
        x0 = feats[:, 0]

        def fn(beta1, cols, vals):
            m = beta1 * x0
            if len(cols):
                m = m + feats[:, cols] @ vals
            a = (m > 0.0).astype(np.int64)
            return float(np.dot(weights, exp.risk.rho[labels, a]))

        return "analytic", fn
    if exp.evaluation["holdout"] > 0:
        holdout = generate(exp.gen_spec.with_size(exp.evaluation["holdout"]),
                           seed=exp.seed + 1_000_003)
        feats = holdout.features
        labels = holdout.labels
        x0 = feats[:, 0]

        def fn(beta1, cols, vals):
            m = beta1 * x0
            if len(cols):
                m = m + feats[:, cols] @ vals
            a = (m > 0.0).astype(np.int64)
            return float(np.mean(exp.risk.rho[labels, a]))

        return f"holdout[{exp.evaluation['holdout']}]", fn
    return None, None


def run_experiment(config, out_dir, seed_override: int | None = None) -> dict:
    """Resolve, validate conditions, sample, evaluate, and write run files."""
    if isinstance(config, (str, Path)):
        with open(config, encoding="utf-8") as fh:
            config = json.load(fh)
    exp = resolve_config(config, seed_override)

    report = validate_conditions(exp.data, exp.prior, exp.risk,
                                 delta_n=exp.delta_n)
    if report.blocking:
        bad = [e.name for e in report.entries if e.status == "fail"]
        raise ConfigError(f"hard condition failure: {bad}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_hash = _config_hash(exp.echo)
    echo = dict(exp.echo)
    echo["config_hash"] = cfg_hash
    echo["artifact_version"] = __version__
    (out / "config_echo.json").write_text(
        json.dumps(echo, indent=2, sort_keys=True), encoding="utf-8")
    conditions_obj = report.to_json_obj()
    conditions_obj.update(seed=exp.seed, config_hash=cfg_hash,
                          artifact_version=__version__)
    (out / "conditions.json").write_text(
        json.dumps(conditions_obj, indent=2, sort_keys=True), encoding="utf-8")

    label, eval_fn = _rule_eval_from(exp)

    psi_grid = exp.evaluation["psi_grid"]
    psi_table = []
    chosen_risk = exp.risk
    if psi_grid and eval_fn is not None:
        for psi in psi_grid:
            rk = derive_risk_spec(exp.risk.rho, psi=psi, sigma_n=exp.risk.sigma_n)
            o = run_chain(exp.data, rk, exp.prior, exp.sampler)
            psi_table.append({"psi": psi,
                              "rule_risk": _posterior_mean_rule_risk(o, eval_fn)})
        best = min(psi_table, key=lambda row: row["rule_risk"])
        chosen_risk = derive_risk_spec(exp.risk.rho, psi=best["psi"],
                                       sigma_n=exp.risk.sigma_n)

    output = run_chain(exp.data, chosen_risk, exp.prior, exp.sampler)
    output.write_trace_csv(
        out / "trace.csv",
        meta=f"seed={exp.seed} config_hash={cfg_hash} version={__version__}")

    summary = {
        "name": exp.name,
        "seed": exp.seed,
        "config": exp.echo,
        "config_hash": cfg_hash,
        "artifact_version": __version__,
        "n": exp.data.n,
        "k": exp.data.k,
        "backend": exp.sampler.backend,
        "psi": chosen_risk.psi,
        "n_kept": output.n_kept,
        "acceptance_rate": output.acceptance_rate,
        "posterior_mean_smoothed_risk": output.posterior_mean_smoothed_risk,
        "inclusion_frequencies": output.inclusion_frequencies().tolist(),
        "condition_warnings": [e.name for e in report.entries
                               if e.status == "warn"],
    }
    if psi_table:
        summary["psi_selection"] = psi_table
    if eval_fn is not None:
        summary["evaluation_kind"] = label
        summary["gibbs_risk"] = _posterior_mean_rule_risk(output, eval_fn)
    if exp.evaluation["oracle_budget"] > 0 and eval_fn is not None:
        from .oracle import best_sparse_rule, screen_columns

        pool = screen_columns(exp.data, min(12, exp.data.k - 1))
        best_beta, _ = best_sparse_rule(exp.data, exp.evaluation["oracle_budget"],
                                        grid=(3.0, 13), pool=pool)
        cols = np.flatnonzero(best_beta[1:] != 0.0) + 1
        best_risk = eval_fn(float(best_beta[0]), cols, best_beta[cols])
        summary["oracle_best_risk"] = best_risk
        summary["oracle_gap"] = summary["gibbs_risk"] - best_risk
    if exp.evaluation["mle_baseline"]:
        mle_beta, converged = logistic_mle_baseline(exp.data)
        summary["mle_converged"] = bool(converged)
        if exp.evaluation["analytic"]:
            summary["mle_risk"] = population_risk_analytic(
                mle_beta, exp.gen_spec, spec=exp.risk)
        elif eval_fn is not None:
            cols = np.flatnonzero(mle_beta[1:] != 0.0) + 1
            summary["mle_risk"] = eval_fn(float(mle_beta[0]), cols, mle_beta[cols])
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
    return summary


def run_suite(name: str, out_dir, threads: int = 1) -> dict:
    """Run a named suite; writes a pass/fail table and returns it."""
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; available: {sorted(SUITES)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fns = SUITES[name]
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_call_criterion, [fn.__name__ for fn in fns]))
    else:
        results = [fn() for fn in fns]
    table = {"suite": name,
             "results": [{"name": r.name, "passed": r.passed,
                          "seconds": round(r.seconds, 2), "details": r.details}
                         for r in results],
             "passed": all(r.passed for r in results)}
    (out / f"suite_{name.replace('-', '_')}.json").write_text(
        json.dumps(table, indent=2, sort_keys=True, default=str), encoding="utf-8")
    for r in results:
        print(r.line())
    return table


def _call_criterion(fn_name: str):
    from . import suites as _s

    return getattr(_s, fn_name)()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gibbsbvs",
        description="Gibbs-posterior variable-selection experiment harness")
    parser.add_argument("--config", metavar="PATH",
                        help="JSON experiment config to run")
    parser.add_argument("--suite", metavar="NAME",
                        help=f"named suite to run: {sorted(SUITES)}")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default="runs", metavar="DIR",
                        help="output directory (default: runs)")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel experiments in a suite")
    args = parser.parse_args(argv)

    def fail(code: int, kind: str, message: str) -> int:
        print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
        return code

    if bool(args.config) == bool(args.suite):
        return fail(2, "config", "exactly one of --config or --suite is required")
    try:
        if args.suite:
            table = run_suite(args.suite, args.out, threads=args.threads)
            return 0 if table["passed"] else 3
        summary = run_experiment(args.config, args.out, seed_override=args.seed)
        print(json.dumps(summary, indent=2, sort_keys=True))
        return 0
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        return fail(2, "config", str(exc))
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        return fail(4, "numeric", str(exc))


if __name__ == "__main__":
    sys.exit(main())
