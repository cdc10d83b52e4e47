"""Priors on the coefficients and on the noise variance.

Coefficient priors:

* :class:`ScaledStudentPrior` -- product density proportional to
  ``(tau^2 + theta_i^2)^{-2}`` truncated to the l1 ball of radius ``c1``.
  Each coordinate is a scale mixture ``theta_i | lam_i ~ N(0, lam_i)``,
  ``lam_i ~ IG(3/2, tau^2/2)``.
* :class:`SpikeSlabPrior` -- product of two-Gaussian mixtures
  ``p N(0, v1) + (1 - p) N(0, v0)``.

Variance prior: :class:`InvGammaPrior` on ``sigma^2``, optionally in its
n-dependent form ``IG(n(1 - alpha)/2 + a, alpha * b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import gammaln, logsumexp

from .model import DesignSpec
from .rng import make_rng

DEFAULT_C1 = 1e6
DEFAULT_IG_SHAPE = 2.0
LOG_2PI = math.log(2.0 * math.pi)


class PriorError(ValueError):
    """Invalid prior configuration or failed prior sampling."""


@dataclass(frozen=True)
class ScaledStudentPrior:
    tau: float
    c1: float
    d: int

    def __post_init__(self):
        if not self.tau > 0:
            raise PriorError(f"tau must be positive, got {self.tau}")
        if not self.c1 > 0:
            raise PriorError(f"c1 must be positive, got {self.c1}")
        if int(self.d) < 1:
            raise PriorError(f"d must be >= 1, got {self.d}")
        object.__setattr__(self, "d", int(self.d))

    kind = "student"

    def log_density(self, theta) -> float:
        return student_log_prior(theta, self)

    def grad_log_density(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return -4.0 * theta / (self.tau**2 + theta**2)

    def in_support(self, theta) -> bool:
        return float(np.abs(theta).sum()) <= self.c1

    def to_dict(self) -> dict:
        return {"kind": "student", "tau": self.tau, "c1": self.c1}


@dataclass(frozen=True)
class SpikeSlabPrior:
    p: float
    v0: float
    v1: float
    d: int

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise PriorError(f"p must lie in [0, 1], got {self.p}")
        if not (0.0 < self.v0 <= self.v1):
            raise PriorError(f"need 0 < v0 <= v1, got v0={self.v0}, v1={self.v1}")
        if int(self.d) < 1:
            raise PriorError(f"d must be >= 1, got {self.d}")
        object.__setattr__(self, "d", int(self.d))

    kind = "spike_slab"

    def log_density(self, theta) -> float:
        return spike_slab_log_prior(theta, self)

    def slab_log_odds(self, theta) -> np.ndarray:
        """Per-coordinate ``log[p phi(theta; v1)] - log[(1-p) phi(theta; v0)]``."""
        theta = np.asarray(theta, dtype=float)
        lp = math.log(self.p) if self.p > 0 else -np.inf
        lq = math.log1p(-self.p) if self.p < 1 else -np.inf
        return (lp + _log_normal(theta, self.v1)) - (lq + _log_normal(theta, self.v0))

    def slab_probability(self, theta) -> np.ndarray:
        lo = self.slab_log_odds(theta)
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + np.exp(-lo))

    def grad_log_density(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        w = self.slab_probability(theta)
        return -theta * (w / self.v1 + (1.0 - w) / self.v0)

    def in_support(self, theta) -> bool:
        return True

    def to_dict(self) -> dict:
        return {"kind": "spike_slab", "p": self.p, "v0": self.v0, "v1": self.v1}


@dataclass(frozen=True)
class InvGammaPrior:
    """Inverse-gamma prior on ``sigma^2`` with shape ``a`` and rate ``b``.

    With ``n_dependent=(n, alpha)`` the prior in use is
    ``IG(n(1 - alpha)/2 + a, alpha * b)``.
    """

    a: float
    b: float
    n_dependent: Optional[tuple] = None

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise PriorError(f"need a > 0 and b > 0, got a={self.a}, b={self.b}")
        if self.n_dependent is not None:
            n, alpha = self.n_dependent
            if not (0 < alpha <= 1) or int(n) < 0:
                raise PriorError(f"invalid n_dependent pair {self.n_dependent}")
            object.__setattr__(self, "n_dependent", (int(n), float(alpha)))

    @property
    def shape(self) -> float:
        if self.n_dependent is None:
            return self.a
        n, alpha = self.n_dependent
        return n * (1.0 - alpha) / 2.0 + self.a

    @property
    def rate(self) -> float:
        if self.n_dependent is None:
            return self.b
        return self.n_dependent[1] * self.b

    def log_density(self, sigma_sq) -> float:
        return inv_gamma_log_prior(sigma_sq, self)

    def sample(self, rng: np.random.Generator, size=None):
        return self.rate / rng.gamma(self.shape, 1.0, size=size)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b}


CoefficientPrior = Union[ScaledStudentPrior, SpikeSlabPrior]


@dataclass(frozen=True)
class MassEstimate:
    estimate: float
    std_error: float
    samples: int


def _log_normal(x, var):
    return -0.5 * (LOG_2PI + math.log(var)) - 0.5 * np.asarray(x, dtype=float) ** 2 / var


def _check_length(theta, d):
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != d:
        raise PriorError(f"theta has length {theta.shape[0]}, prior has d={d}")
    return theta


def student_log_prior(theta, prior: ScaledStudentPrior) -> float:
    """Unnormalized log-density ``-2 sum log(tau^2 + theta_i^2)``; ``-inf`` outside the l1 ball."""
    theta = _check_length(theta, prior.d)
    if float(np.abs(theta).sum()) > prior.c1:
        return -math.inf
    return float(-2.0 * np.log(prior.tau**2 + theta**2).sum())


def student_coordinate_log_density(t, tau: float):
    """Normalized untruncated coordinate density ``(2 tau^3 / pi) (tau^2 + t^2)^{-2}``."""
    t = np.asarray(t, dtype=float)
    return math.log(2.0 / math.pi) + 3.0 * math.log(tau) - 2.0 * np.log(tau**2 + t**2)


def sample_student_coordinates(tau: float, size, rng: np.random.Generator) -> np.ndarray:
    """Untruncated draws via the normal / inverse-gamma scale mixture."""
    lam = (tau**2 / 2.0) / rng.gamma(1.5, 1.0, size=size)
    return rng.standard_normal(size) * np.sqrt(lam)


def sample_student_prior(prior: ScaledStudentPrior, seed, size: Optional[int] = None, min_acceptance: float = 1e-6):
    """Draw from the truncated scaled-Student prior.

    Whole vectors are drawn from the scale mixture and rejected until they fall
    in the l1 ball. Returns a ``(d,)`` vector, or ``(size, d)`` when ``size``
    is given. Raises :class:`PriorError` when the acceptance rate drops below
    ``min_acceptance``.
    """
    rng = make_rng(seed)
    want = 1 if size is None else int(size)
    out = np.empty((want, prior.d))
    filled = tried = 0
    batch = max(64, want)
    min_tries = int(10 / min_acceptance)
    while filled < want:
        draws = sample_student_coordinates(prior.tau, (batch, prior.d), rng)
        ok = np.abs(draws).sum(axis=1) <= prior.c1
        tried += batch
        k = min(int(ok.sum()), want - filled)
        out[filled : filled + k] = draws[ok][:k]
        filled += k
        if tried >= min_tries and filled < tried * min_acceptance:
            raise PriorError(
                f"rejection acceptance {filled / tried:.3g} below {min_acceptance:g}; tau={prior.tau}, c1={prior.c1}"
            )
        batch = min(max(batch, 2 * (want - filled)), 1 << 20)
    return out[0] if size is None else out


def spike_slab_log_prior(theta, prior: SpikeSlabPrior) -> float:
    """``sum_i log[p phi(theta_i; 0, v1) + (1 - p) phi(theta_i; 0, v0)]``."""
    theta = _check_length(theta, prior.d)
    comps = np.stack([_log_normal(theta, prior.v1), _log_normal(theta, prior.v0)])
    weights = np.array([prior.p, 1.0 - prior.p])[:, None]
    return float(logsumexp(comps, axis=0, b=np.broadcast_to(weights, comps.shape)).sum())


def sample_spike_slab_prior(prior: SpikeSlabPrior, seed, size: Optional[int] = None):
    rng = make_rng(seed)
    shape = (1 if size is None else int(size), prior.d)
    z = rng.random(shape) < prior.p
    var = np.where(z, prior.v1, prior.v0)
    theta = rng.standard_normal(shape) * np.sqrt(var)
    return theta[0] if size is None else theta


def inv_gamma_log_prior(sigma_sq: float, prior: InvGammaPrior) -> float:
    """Inverse-gamma log-density of ``sigma^2`` (n-dependent pair used when flagged)."""
    if not sigma_sq > 0:
        raise PriorError(f"sigma_sq must be positive, got {sigma_sq}")
    a, b = prior.shape, prior.rate
    return a * math.log(b) - float(gammaln(a)) - (a + 1.0) * math.log(sigma_sq) - b / sigma_sq


def default_tau(design: DesignSpec, n: int) -> float:
    """``tau = 1 / (C_x sqrt(n d))``."""
    return 1.0 / (design.c_x * math.sqrt(max(n, 1) * design.d))


def default_student_prior(design: DesignSpec, n: int, tau: Optional[float] = None, c1: float = DEFAULT_C1):
    return ScaledStudentPrior(default_tau(design, n) if tau is None else tau, c1, design.d)


def default_spike_slab_prior(n: int, d: int, p=None, v0=None, v1: float = 1.0) -> SpikeSlabPrior:
    """``p = 1 - exp(-1/d)``, ``v0 = 1/(2 n d log 2)``, ``v1 = 1``."""
    p = -math.expm1(-1.0 / d) if p is None else p
    v0 = 1.0 / (2.0 * max(n, 1) * d * math.log(2.0)) if v0 is None else v0
    return SpikeSlabPrior(p, v0, v1, d)


def default_inv_gamma(n: int, a: float = DEFAULT_IG_SHAPE, b: Optional[float] = None) -> InvGammaPrior:
    """``IG(2, n^{-1/2})`` unless overridden."""
    return InvGammaPrior(a, 1.0 / math.sqrt(max(n, 1)) if b is None else b)


def _ball_indicator(samples, center, radius, norm):
    diff = samples - center
    if norm == "L1":
        dist = np.abs(diff).sum(axis=-1)
    elif norm == "L2":
        dist = np.sqrt((diff**2).sum(axis=-1))
    elif norm == "interval":
        dist = np.abs(diff)
    else:
        raise PriorError(f"unknown norm {norm!r}")
    return dist <= radius


def prior_mass_ball(prior, center, radius: float, norm: str, mc_samples: int = 10_000, seed=0) -> MassEstimate:
    """Monte-Carlo prior probability of ``{dist(theta, center) <= radius}``.

    ``norm`` is ``"L1"``, ``"L2"`` (coefficient priors) or ``"interval"``
    (inverse-gamma prior, ``|sigma^2 - center| <= radius``). For the
    spike-and-slab prior the slab indicators are drawn from a tilted law on
    coordinates whose centre the spike cannot reach, and the estimate is
    importance-weighted back to the prior; it stays unbiased.
    """
    if not radius > 0:
        raise PriorError(f"radius must be positive, got {radius}")
    if mc_samples < 1000:
        raise PriorError(f"need at least 1000 Monte-Carlo samples, got {mc_samples}")
    if math.isinf(radius):
        return MassEstimate(1.0, 0.0, mc_samples)
    rng = make_rng(seed)
    if isinstance(prior, InvGammaPrior):
        if norm != "interval":
            raise PriorError("inverse-gamma mass uses norm='interval'")
        hits = _ball_indicator(prior.sample(rng, mc_samples), float(center), radius, norm).astype(float)
        return _mean_se(hits)
    center = np.broadcast_to(np.asarray(center, dtype=float), (prior.d,))
    if isinstance(prior, ScaledStudentPrior):
        values = np.empty(mc_samples)
        chunk = 1 << 14
        for start in range(0, mc_samples, chunk):
            k = min(chunk, mc_samples - start)
            draws = sample_student_prior(prior, rng, size=k)
            values[start : start + k] = _ball_indicator(draws, center, radius, norm)
        return _mean_se(values)
    if isinstance(prior, SpikeSlabPrior):
        return _spike_slab_mass(prior, center, radius, norm, mc_samples, rng)
    raise PriorError(f"unsupported prior {type(prior).__name__}")


def _spike_slab_mass(prior, center, radius, norm, mc_samples, rng):
    far = np.abs(center) > 6.0 * math.sqrt(prior.v0)
    q = np.where(far & (prior.p > 0), max(prior.p, 0.9), prior.p)
    values = np.empty(mc_samples)
    chunk = 1 << 13
    lp = math.log(prior.p) if prior.p > 0 else -np.inf
    lq1 = math.log1p(-prior.p) if prior.p < 1 else -np.inf
    with np.errstate(divide="ignore"):
        log_q, log_q1 = np.log(q), np.log1p(-q)
    for start in range(0, mc_samples, chunk):
        k = min(chunk, mc_samples - start)
        z = rng.random((k, prior.d)) < q
        theta = rng.standard_normal((k, prior.d)) * np.sqrt(np.where(z, prior.v1, prior.v0))
        with np.errstate(invalid="ignore"):
            log_w = np.where(z, lp - log_q, lq1 - log_q1).sum(axis=1)
        hit = _ball_indicator(theta, center, radius, norm)
        values[start : start + k] = np.where(hit, np.exp(log_w), 0.0)
    return _mean_se(values)


def _mean_se(values) -> MassEstimate:
    values = np.asarray(values, dtype=float)
    m = values.shape[0]
    return MassEstimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(m)), m)
