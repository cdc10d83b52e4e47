"""Conjugate Gibbs samplers for the tempered Gaussian likelihood.

Raising the Gaussian likelihood to the power ``alpha`` keeps it Gaussian in
``theta`` (precision ``alpha X^T X / sigma^2``) and inverse-gamma shaped in
``sigma^2``, so both coefficient priors admit exact conditional updates once
they are written as Gaussian scale mixtures.

Auxiliary-variable Gibbs alone can trap a coordinate near zero: once its
mixture variance collapses to the spike/``tau^2`` scale, the coefficient
cannot leave even when the data strongly favour a signal. Each sweep
therefore also performs, per coordinate, a Metropolis-Hastings update of
``theta_i`` with its auxiliary variable integrated out (a blocked update of
``(theta_i, aux_i)``). The independence proposal mixes the likelihood
conditional with the prior coordinate law, which keeps importance weights
bounded in both the spike and the signal regions.
"""

from __future__ import annotations

import logging
import math

import numpy as np
import scipy.linalg as sla
from scipy.stats import truncnorm

from ..model import Dataset, ParameterPoint, residual_sum_squares
from ..priors import (
    InvGammaPrior,
    ScaledStudentPrior,
    SpikeSlabPrior,
    sample_student_coordinates,
    student_coordinate_log_density,
)
from ..rng import make_rng
from .chain import INIT_TRUTH, INIT_ZERO, Chain, SamplerConfig, SamplerError

log = logging.getLogger(__name__)

MAX_JOINT_TRIES = 50


class GaussianConditional:
    """Draws ``theta ~ N(Q^{-1} s X^T y, Q^{-1})`` with ``Q = s X^T X + diag(1/D)``.

    Uses a ``d x d`` Cholesky factorization, or the ``n``-dimensional dual
    system when that is cheaper (``n`` much smaller than ``d``).
    """

    def __init__(self, data: Dataset):
        self.x = np.asarray(data.x)
        self.y = np.asarray(data.y)
        self.n, self.d = self.x.shape
        self.xtx = self.x.T @ self.x
        self.xty = self.x.T @ self.y
        self.diag_list = np.diag(self.xtx).tolist()
        self.xty_list = self.xty.tolist()
        self.use_dual = self.n == 0 or (self.n * self.n * self.d + self.n**3 / 3.0) < self.d**3 / 3.0

    def precision(self, scale: float, prior_var: np.ndarray) -> np.ndarray:
        q = scale * self.xtx
        q[np.diag_indices_from(q)] += 1.0 / prior_var
        return q

    def mean(self, scale: float, prior_var: np.ndarray) -> np.ndarray:
        return sla.solve(self.precision(scale, prior_var), scale * self.xty, assume_a="pos")

    def draw(self, scale: float, prior_var: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.use_dual:
            u = rng.standard_normal(self.d) * np.sqrt(prior_var)
            if self.n == 0:
                return u
            root = math.sqrt(scale)
            phi = root * self.x
            v = phi @ u + rng.standard_normal(self.n)
            m = (phi * prior_var) @ phi.T
            m[np.diag_indices_from(m)] += 1.0
            try:
                w = sla.solve(m, root * self.y - v, assume_a="pos")
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise SamplerError(f"dual system solve failed: {exc}") from exc
            theta = u + prior_var * (phi.T @ w)
        else:
            q = self.precision(scale, prior_var)
            try:
                chol = sla.cholesky(q, lower=True, check_finite=True)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise SamplerError(f"precision factorization failed: {exc}") from exc
            mu = sla.cho_solve((chol, True), scale * self.xty)
            theta = mu + sla.solve_triangular(chol.T, rng.standard_normal(self.d), lower=False)
        if not np.all(np.isfinite(theta)):
            raise SamplerError("non-finite coefficient draw")
        return theta


def sigma_sq_conditional(data: Dataset, theta, ig: InvGammaPrior, alpha: float):
    """Shape and rate of ``sigma^2 | theta, data`` under the tempered likelihood."""
    rss = residual_sum_squares(data, theta) if data.n else 0.0
    return ig.shape + data.n * alpha / 2.0, ig.rate + alpha * rss / 2.0


def _draw_sigma_sq(data, theta, ig, alpha, rng):
    shape, rate = sigma_sq_conditional(data, theta, ig, alpha)
    return rate / rng.gamma(shape)


def _initial_state(data: Dataset, cfg: SamplerConfig, ig: InvGammaPrior):
    if cfg.init == INIT_ZERO:
        theta = np.zeros(data.d)
        sigma_sq = float(np.var(data.y, ddof=1)) if data.n >= 2 else ig.rate / (ig.shape + 1.0)
    elif cfg.init == INIT_TRUTH:
        if data.truth is None:
            raise SamplerError("init='truth' needs a dataset with recorded truth")
        theta, sigma_sq = data.truth.theta.copy(), data.truth.sigma_sq
    else:
        theta, sigma_sq = cfg.init.theta.copy(), cfg.init.sigma_sq
    if not sigma_sq > 0:
        sigma_sq = ig.rate / (ig.shape + 1.0)
    return np.array(theta, dtype=float), float(sigma_sq)


def _coordinate_truncated_update(cond, theta, scale, prior_var, c1, rng):
    """One exact coordinate-wise sweep of the l1-truncated Gaussian conditional."""
    q = cond.precision(scale, prior_var)
    mu = sla.solve(q, scale * cond.xty, assume_a="pos")
    theta = theta.copy()
    for i in range(theta.shape[0]):
        qii = q[i, i]
        mean = mu[i] - (q[i] @ (theta - mu) - qii * (theta[i] - mu[i])) / qii
        sd = 1.0 / math.sqrt(qii)
        room = c1 - (np.abs(theta).sum() - abs(theta[i]))
        a, b = (-room - mean) / sd, (room - mean) / sd
        theta[i] = truncnorm.rvs(a, b, loc=mean, scale=sd, random_state=rng)
    return theta


def _logaddexp(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    if b == -math.inf:
        return a
    return a + math.log1p(math.exp(b - a))


class _CoordinateLaw:
    """Normalized untruncated marginal prior of one coefficient (scalar math)."""

    def __init__(self, prior):
        if isinstance(prior, ScaledStudentPrior):
            tau = prior.tau
            tau_sq = tau * tau
            const = math.log(2.0 / math.pi) + 3.0 * math.log(tau)
            self.logpdf = lambda t: const - 2.0 * math.log(tau_sq + t * t)
            self.sample = lambda rng, k: sample_student_coordinates(tau, k, rng)
        else:
            p, v0, v1 = prior.p, prior.v0, prior.v1
            a1 = (math.log(p) if p > 0 else -math.inf) - 0.5 * math.log(2 * math.pi * v1)
            a0 = (math.log1p(-p) if p < 1 else -math.inf) - 0.5 * math.log(2 * math.pi * v0)
            h1, h0 = 0.5 / v1, 0.5 / v0
            self.logpdf = lambda t: _logaddexp(a1 - h1 * t * t, a0 - h0 * t * t)

            def sample(rng, k):
                z = rng.random(k) < p
                return rng.standard_normal(k) * np.sqrt(np.where(z, v1, v0))

            self.sample = sample


def _coordinate_mh_sweep(cond, theta, scale, law, c1, rng):
    """Collapsed MH update of every coordinate; returns ``(theta, accepted)``.

    Target for coordinate ``i``: marginal prior times the tempered Gaussian
    likelihood ``exp(-k (t - m)^2 / 2)`` with ``k = scale G_ii`` and ``m`` the
    least-squares value given the other coordinates.
    """
    d = theta.shape[0]
    xtx = cond.xtx
    xty, diag = cond.xty_list, cond.diag_list
    g = xtx @ theta
    th = theta.tolist()
    l1 = float(np.abs(theta).sum())
    use_prior = (rng.random(d) >= 0.5).tolist()
    z_norm = rng.standard_normal(d).tolist()
    from_prior = law.sample(rng, d).tolist()
    log_u = np.log(rng.random(d)).tolist()
    logpdf = law.logpdf
    half_log_2pi = 0.5 * math.log(2 * math.pi)
    accepted = 0
    for i in range(d):
        gii = diag[i]
        if gii <= 0:
            continue
        t = th[i]
        k = scale * gii
        m = (xty[i] - (float(g[i]) - gii * t)) / gii
        sd = 1.0 / math.sqrt(k)
        t_new = from_prior[i] if use_prior[i] else m + sd * z_norm[i]
        if abs(t_new) > c1 - (l1 - abs(t)):
            continue
        lnorm = -math.log(sd) - half_log_2pi
        lp_new, lp_old = logpdf(t_new), logpdf(t)
        e_new, e_old = 0.5 * k * (t_new - m) ** 2, 0.5 * k * (t - m) ** 2
        # the mixture proposal q = (N(m, 1/k) + prior) / 2; its 1/2 cancels
        log_ratio = (lp_new - e_new + _logaddexp(lnorm - e_old, lp_old)) - (
            lp_old - e_old + _logaddexp(lnorm - e_new, lp_new)
        )
        if log_u[i] < log_ratio:
            # G is symmetric, so the contiguous row stands in for the column
            g += xtx[i] * (t_new - t)
            l1 += abs(t_new) - abs(t)
            th[i] = t_new
            accepted += 1
    return np.array(th), accepted


class _Recorder:
    def __init__(self, cfg: SamplerConfig, d: int, aux: bool = True):
        k = cfg.kept
        self.cfg = cfg
        self.theta = np.empty((k, d))
        self.sigma = np.empty(k)
        self.aux = np.empty((k, d)) if aux else None
        self.slot = 0

    def maybe_store(self, it, theta, sigma_sq, aux=None):
        cfg = self.cfg
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            self.theta[self.slot] = theta
            self.sigma[self.slot] = math.sqrt(sigma_sq)
            if self.aux is not None:
                self.aux[self.slot] = aux
            self.slot += 1


def run_student_gibbs(
    data: Dataset, prior: ScaledStudentPrior, ig: InvGammaPrior, cfg: SamplerConfig, store_aux: bool = True
) -> Chain:
    """Systematic-scan Gibbs for the scaled-Student prior.

    Sweep order ``theta -> collapsed coordinate moves -> lambda -> sigma^2``;
    the scale-mixture variances
    start at 1 (or are drawn given a non-zero initial theta). Coefficient draws leaving the l1 ball are redrawn; with
    ``cfg.truncation == "coordinate"`` a run of rejected joint draws falls back to
    an exact coordinate-wise truncated-normal sweep.
    """
    if prior.d != data.d:
        raise SamplerError(f"prior has d={prior.d}, data has d={data.d}")
    rng = make_rng(cfg.seed)
    cond = GaussianConditional(data)
    theta, sigma_sq = _initial_state(data, cfg, ig)
    if not prior.in_support(theta):
        raise SamplerError("initial coefficients lie outside the l1 ball")
    # unit variances from a zero start; otherwise drawn given the initial theta
    if cfg.init == INIT_ZERO:
        lam = np.ones(data.d)
    else:
        lam = (0.5 * (theta**2 + prior.tau**2)) / rng.gamma(2.0, 1.0, size=data.d)
    law = _CoordinateLaw(prior) if cfg.coordinate_moves and data.n else None
    tau_sq = prior.tau**2
    rec = _Recorder(cfg, data.d, store_aux)
    rejections = proposals = 0
    for it in range(cfg.iterations):
        scale = cfg.alpha / sigma_sq
        for _ in range(MAX_JOINT_TRIES):
            proposals += 1
            cand = cond.draw(scale, lam, rng)
            if np.abs(cand).sum() <= prior.c1:
                theta = cand
                break
            rejections += 1
        else:
            if cfg.truncation != "coordinate":
                raise SamplerError(
                    f"{MAX_JOINT_TRIES} consecutive coefficient draws fell outside the l1 ball (c1={prior.c1})"
                )
            theta = _coordinate_truncated_update(cond, theta, scale, lam, prior.c1, rng)
        if law is not None:
            theta, _ = _coordinate_mh_sweep(cond, theta, scale, law, prior.c1, rng)
        # lambda_i | theta_i ~ IG(2, (theta_i^2 + tau^2) / 2)
        lam = (0.5 * (theta**2 + tau_sq)) / rng.gamma(2.0, 1.0, size=data.d)
        lam = np.maximum(lam, np.finfo(float).tiny)
        sigma_sq = _draw_sigma_sq(data, theta, ig, cfg.alpha, rng)
        rec.maybe_store(it, theta, sigma_sq, lam)
    rate = rejections / proposals if proposals else 0.0
    if rejections:
        log.info("student gibbs: %d of %d coefficient draws rejected by the l1 constraint", rejections, proposals)
    if rate > 0.5 and cfg.truncation != "coordinate":
        raise SamplerError(f"l1 rejection rate {rate:.2f} exceeds 50%; c1={prior.c1} is too small for this data")
    return Chain(rec.theta, rec.sigma, cfg, aux=rec.aux, rejections=rejections, proposals=proposals)


def run_spike_slab_gibbs(
    data: Dataset, prior: SpikeSlabPrior, ig: InvGammaPrior, cfg: SamplerConfig, store_aux: bool = True
) -> Chain:
    """Gibbs on ``(theta, z, sigma^2)``; ``z_i = 1`` selects the slab.

    Sweep order ``theta -> collapsed coordinate moves -> z -> sigma^2``;
    indicators start in the slab (or are drawn given a non-zero initial theta).
    """
    if prior.d != data.d:
        raise SamplerError(f"prior has d={prior.d}, data has d={data.d}")
    rng = make_rng(cfg.seed)
    cond = GaussianConditional(data)
    theta, sigma_sq = _initial_state(data, cfg, ig)
    if cfg.init == INIT_ZERO:
        z = np.ones(data.d, dtype=bool)
    else:
        z = rng.random(data.d) < prior.slab_probability(theta)
    law = _CoordinateLaw(prior) if cfg.coordinate_moves and data.n else None
    rec = _Recorder(cfg, data.d, store_aux)
    for it in range(cfg.iterations):
        var = np.where(z, prior.v1, prior.v0)
        scale = cfg.alpha / sigma_sq
        theta = cond.draw(scale, var, rng)
        if law is not None:
            theta, _ = _coordinate_mh_sweep(cond, theta, scale, law, math.inf, rng)
        z = rng.random(data.d) < prior.slab_probability(theta)
        sigma_sq = _draw_sigma_sq(data, theta, ig, cfg.alpha, rng)
        rec.maybe_store(it, theta, sigma_sq, z)
    return Chain(rec.theta, rec.sigma, cfg, aux=rec.aux)


def run_gibbs(data, prior, ig, cfg, store_aux: bool = True) -> Chain:
    """Dispatch on the prior type."""
    if isinstance(prior, ScaledStudentPrior):
        return run_student_gibbs(data, prior, ig, cfg, store_aux)
    if isinstance(prior, SpikeSlabPrior):
        return run_spike_slab_gibbs(data, prior, ig, cfg, store_aux)
    raise SamplerError(f"no Gibbs kernel for {type(prior).__name__}")
