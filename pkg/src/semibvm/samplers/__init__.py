"""MCMC posterior samplers for the three Bayesian configurations."""

from .chain import (
    PosteriorChain,
    SamplerConfig,
    chain_ess,
    effective_sample_size,
    sample_inverse_gamma,
)
from .dpm_gibbs import (
    dpm_mixture_logpdf,
    dpm_posterior_predictive_pdf,
    fit_b2_mixed,
    fit_b2_regression,
)
from .gaussian_gibbs import fit_b1_mixed
from .series_mh import fit_series_regression

__all__ = [
    "PosteriorChain",
    "SamplerConfig",
    "chain_ess",
    "effective_sample_size",
    "sample_inverse_gamma",
    "fit_b1_mixed",
    "fit_b2_mixed",
    "fit_b2_regression",
    "fit_series_regression",
    "dpm_mixture_logpdf",
    "dpm_posterior_predictive_pdf",
]
