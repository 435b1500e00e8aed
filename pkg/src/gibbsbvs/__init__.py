"""Gibbs-posterior Bayesian variable selection for linear classification.

A quasi-posterior proportional to exp(-n psi R_n) times a size-restricted
normal-binary prior, sampled by a data-augmentation Gibbs chain (or a
Metropolis backend on the unsmoothed risk), with exact desk-scale oracles
for every verifiable identity.
"""

__version__ = "0.1.0"

from ._backend import NUMBA_ENABLED
from .core import (CLASSIFICATION_RHO, Coefficients, ConditionReport, Dataset,
                   ModelIndicator, PriorSpec, RiskSpec, auto_prior_spec,
                   default_delta, derive_risk_spec, validate_conditions)
from .generators import (GeneratorSpec, gen_indicator_grid,
                         gen_misspecified_logistic, gen_sparse_linear,
                         generate, ingest_csv)
from .prior import PriorDraw, log_prior_coefficients, log_prior_model, sample_prior
from .risk import (DecisionRule, empirical_risk_unsmoothed,
                   population_risk_analytic, population_risk_mc,
                   sample_risk_smoothed)
from .rng import Stream
from .sampler import ChainOutput, SamplerConfig, SamplerState, run_chain, run_metropolis

__all__ = [
    "__version__",
    "NUMBA_ENABLED",
    "CLASSIFICATION_RHO",
    "ChainOutput",
    "Coefficients",
    "ConditionReport",
    "Dataset",
    "DecisionRule",
    "GeneratorSpec",
    "ModelIndicator",
    "PriorDraw",
    "PriorSpec",
    "RiskSpec",
    "SamplerConfig",
    "SamplerState",
    "Stream",
    "auto_prior_spec",
    "default_delta",
    "derive_risk_spec",
    "empirical_risk_unsmoothed",
    "gen_indicator_grid",
    "gen_misspecified_logistic",
    "gen_sparse_linear",
    "generate",
    "ingest_csv",
    "log_prior_coefficients",
    "log_prior_model",
    "population_risk_analytic",
    "population_risk_mc",
    "run_chain",
    "run_metropolis",
    "sample_prior",
    "sample_risk_smoothed",
    "validate_conditions",
]
