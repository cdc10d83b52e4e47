"""Posterior functionals and the unnormalized log-posterior."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..divergences import DivergenceKind, conditional_divergence, lift_joint
from ..model import Dataset, DesignSpec, ParameterPoint, fractional_log_likelihood
from ..priors import InvGammaPrior, inv_gamma_log_prior
from ..rng import make_rng
from .chain import Chain
from .diagnostics import series_mcse

JOINT_DIVERGENCE = "joint_divergence"
SQ_PREDICTION_ERROR = "sq_prediction_error"
SQ_L2_ERROR = "sq_l2_error"
SQ_L1_ERROR = "sq_l1_error"
SIGMA_SQ_ERROR = "sigma_sq_error"
FUNCTIONALS = (JOINT_DIVERGENCE, SQ_PREDICTION_ERROR, SQ_L2_ERROR, SQ_L1_ERROR, SIGMA_SQ_ERROR)


@dataclass(frozen=True)
class Functional:
    """A per-draw functional of ``(theta, sigma)`` against the truth.

    ``sigma_sq_error`` is ``(sigma - sigma0)^2`` and ``sq_l1_error`` is
    ``||theta - theta0||_1^2``.
    """

    name: str
    divergence: Optional[DivergenceKind] = None

    def __post_init__(self):
        if self.name not in FUNCTIONALS:
            raise ValueError(f"unknown functional {self.name!r}")
        if self.name == JOINT_DIVERGENCE and self.divergence is None:
            raise ValueError("joint_divergence needs a divergence kind")

    def label(self) -> str:
        if self.name == JOINT_DIVERGENCE:
            return f"{self.name}:{self.divergence.label()}"
        return self.name

    @classmethod
    def parse(cls, text: str) -> "Functional":
        """Parse ``"sq_l2_error"`` or ``"joint_divergence:renyi_0.9"`` style labels."""
        name, _, arg = text.partition(":")
        if name != JOINT_DIVERGENCE:
            return cls(name)
        if arg.startswith("renyi_"):
            return cls(name, DivergenceKind.renyi(float(arg[len("renyi_") :])))
        return cls(name, DivergenceKind(arg))


@dataclass(frozen=True)
class FunctionalEstimate:
    mean: float
    mcse: float
    values: np.ndarray


def per_draw_values(
    theta: np.ndarray,
    sigma: np.ndarray,
    functional: Functional,
    truth: ParameterPoint,
    design: DesignSpec,
    m: int = 10_000,
    seed=0,
    chunk: int = 256,
) -> np.ndarray:
    delta = np.asarray(theta) - truth.theta
    sigma = np.asarray(sigma, dtype=float)
    name = functional.name
    if name == SQ_L2_ERROR:
        return (delta**2).sum(axis=1)
    if name == SQ_L1_ERROR:
        return np.abs(delta).sum(axis=1) ** 2
    if name == SIGMA_SQ_ERROR:
        return (sigma - truth.sigma) ** 2
    if name == SQ_PREDICTION_ERROR:
        if design.is_isotropic:
            return np.array([design.projection_second_moment(row) for row in delta])
        out = np.empty(delta.shape[0])
        for start in range(0, delta.shape[0], chunk):
            proj = design.sample_projections(delta[start : start + chunk], m, make_rng(seed))
            out[start : start + chunk] = (proj**2).mean(axis=1)
        return out
    # joint divergence: common design draws for every posterior draw
    out = np.empty(delta.shape[0])
    for start in range(0, delta.shape[0], chunk):
        stop = min(start + chunk, delta.shape[0])
        proj = design.sample_projections(delta[start:stop], m, make_rng(seed))
        for j in range(stop - start):
            cond = conditional_divergence(functional.divergence, proj[j], sigma[start + j] ** 2, truth.sigma_sq)
            value, _ = lift_joint(functional.divergence, cond)
            out[start + j] = value
    return out


def posterior_functional(
    chain: Chain,
    functional: Functional,
    truth: ParameterPoint,
    design: DesignSpec,
    m: int = 10_000,
    seed=0,
    max_draws: Optional[int] = None,
) -> FunctionalEstimate:
    """Chain average of a per-draw functional with its Monte-Carlo standard error.

    ``max_draws`` evaluates the functional on an evenly thinned subset of
    draws, which keeps design-expectation functionals affordable.
    """
    theta, sigma = chain.theta, chain.sigma
    if max_draws is not None and len(chain) > max_draws:
        idx = np.linspace(0, len(chain) - 1, max_draws).round().astype(int)
        theta, sigma = theta[idx], sigma[idx]
    values = per_draw_values(theta, sigma, functional, truth, design, m, seed)
    return FunctionalEstimate(float(values.mean()), float(series_mcse(values)), values)


def log_posterior_unnormalized(data: Dataset, prior, ig: InvGammaPrior, point: ParameterPoint, alpha: float) -> float:
    """Tempered log-likelihood plus coefficient and variance log-priors.

    The variance prior is a density in ``sigma^2``.
    """
    lp = prior.log_density(point.theta)
    if not math.isfinite(lp):
        return -math.inf
    return fractional_log_likelihood(data, point, alpha) + lp + inv_gamma_log_prior(point.sigma_sq, ig)
