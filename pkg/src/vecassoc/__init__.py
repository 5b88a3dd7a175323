"""Copula-based association measures between two random vectors."""

from .baselines import canonical_correlation, distance_correlation, rv_coefficient
from .copulas import CopulaSpec, population_value, sample
from .estimators import estimate
from .exceptions import (
    DegenerateInputError,
    InsufficientDataError,
    InvalidInputError,
    ParameterError,
    VecAssocError,
)
from .measures import (
    ALL_MEASURES,
    Convention,
    MeasureEstimate,
    decompose_total,
    pairwise_spearman,
    rho1,
    rho2,
    rho3,
    rho4,
    rho_bar,
)
from .ranks import (
    PseudoSample,
    SampleMatrix,
    Scaling,
    empirical_copula,
    marginal_copula_scores,
    pi_transform,
    pseudo_observations,
)
from .resampling import ResamplingConfig, bootstrap_se, jackknife_se

__version__ = "0.1.0"

__all__ = [
    "ALL_MEASURES",
    "Convention",
    "CopulaSpec",
    "DegenerateInputError",
    "InsufficientDataError",
    "InvalidInputError",
    "MeasureEstimate",
    "ParameterError",
    "PseudoSample",
    "ResamplingConfig",
    "SampleMatrix",
    "Scaling",
    "VecAssocError",
    "bootstrap_se",
    "canonical_correlation",
    "decompose_total",
    "distance_correlation",
    "empirical_copula",
    "estimate",
    "jackknife_se",
    "marginal_copula_scores",
    "pairwise_spearman",
    "pi_transform",
    "population_value",
    "pseudo_observations",
    "rho1",
    "rho2",
    "rho3",
    "rho4",
    "rho_bar",
    "rv_coefficient",
    "sample",
]
