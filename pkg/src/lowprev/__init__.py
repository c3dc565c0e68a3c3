"""Lower previsions estimated by envelopes of importance sampling estimators."""

from .confint import (
    ConfidenceInterval,
    confidence_interval_biased,
    confidence_interval_exact,
    confidence_interval_fast,
    direct_mean_ci,
    t_critical,
)
from .envelope import EnvelopeResult, OptimizerConfig, lower_estimate, tau, upper_estimate
from .estimator import DegenerateWeightsError, self_normalised_estimate, standard_estimate
from .iterate import iterate_importance, run_full_pipeline, stability_check
from .model import ConstrainedSimplex, DirichletParams, GambleSpec, ModelError, Problem
from .sampling import SampleBatch, derive_seed, sample_dirichlet

__version__ = "0.1.0"

__all__ = [
    "ConfidenceInterval",
    "ConstrainedSimplex",
    "DegenerateWeightsError",
    "DirichletParams",
    "EnvelopeResult",
    "GambleSpec",
    "ModelError",
    "OptimizerConfig",
    "Problem",
    "SampleBatch",
    "confidence_interval_biased",
    "confidence_interval_exact",
    "confidence_interval_fast",
    "derive_seed",
    "direct_mean_ci",
    "iterate_importance",
    "lower_estimate",
    "run_full_pipeline",
    "sample_dirichlet",
    "self_normalised_estimate",
    "stability_check",
    "standard_estimate",
    "t_critical",
    "tau",
    "upper_estimate",
]
