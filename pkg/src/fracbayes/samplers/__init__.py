"""MCMC for tempered (``alpha < 1``) and regular (``alpha = 1``) posteriors."""

from .chain import Chain, SamplerConfig, SamplerError, alpha_log_schedule, single_draw_chain, stack_draws
from .diagnostics import ChainDiagnostics, autocorrelation, chain_diagnostics, effective_sample_size, series_mcse
from .functionals import (
    Functional,
    FunctionalEstimate,
    log_posterior_unnormalized,
    per_draw_values,
    posterior_functional,
)
from .gibbs import GaussianConditional, run_gibbs, run_spike_slab_gibbs, run_student_gibbs, sigma_sq_conditional
from .mala import LogTarget, run_mala

__all__ = [
    "Chain",
    "ChainDiagnostics",
    "Functional",
    "FunctionalEstimate",
    "GaussianConditional",
    "LogTarget",
    "SamplerConfig",
    "SamplerError",
    "alpha_log_schedule",
    "autocorrelation",
    "chain_diagnostics",
    "effective_sample_size",
    "log_posterior_unnormalized",
    "per_draw_values",
    "posterior_functional",
    "run_gibbs",
    "run_mala",
    "run_spike_slab_gibbs",
    "run_student_gibbs",
    "series_mcse",
    "sigma_sq_conditional",
    "single_draw_chain",
    "stack_draws",
]
