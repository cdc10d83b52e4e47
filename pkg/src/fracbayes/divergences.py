"""Divergences between Gaussian regression laws.

Conventions: squared Hellinger is ``H^2 = int (sqrt(p) - sqrt(q))^2`` and
therefore lies in ``[0, 2]``; ``D_alpha`` is the Renyi divergence
``1/(alpha - 1) log int p^alpha q^(1 - alpha)``.

Joint divergences between ``P_{theta,sigma}`` and ``P_{theta0,sigma0}`` share
the design marginal, so they reduce to expectations over ``X`` of the
conditional (univariate Gaussian) divergences. Those expectations are
estimated by Monte Carlo over fresh design draws.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import logsumexp, ndtr

from .model import DesignSpec, ParameterPoint
from .rng import make_rng


class DivergenceError(ValueError):
    pass


KL = "kl"
RENYI = "renyi"
HELLINGER_SQ = "hellinger_sq"
TV = "tv"


@dataclass(frozen=True)
class DivergenceKind:
    name: str
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.name not in (KL, RENYI, HELLINGER_SQ, TV):
            raise DivergenceError(f"unknown divergence {self.name!r}")
        if self.name == RENYI and not (self.alpha is not None and 0.0 < self.alpha < 1.0):
            raise DivergenceError(f"Renyi order must lie strictly inside (0, 1), got {self.alpha}")

    @classmethod
    def kl(cls):
        return cls(KL)

    @classmethod
    def renyi(cls, alpha):
        return cls(RENYI, float(alpha))

    @classmethod
    def hellinger_sq(cls):
        return cls(HELLINGER_SQ)

    @classmethod
    def tv(cls):
        return cls(TV)

    def label(self) -> str:
        return f"renyi_{self.alpha:g}" if self.name == RENYI else self.name


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    std_error: float
    method: str
    m: int = 0


def _check_var(*vs):
    for v in vs:
        if not np.all(np.asarray(v) > 0):
            raise DivergenceError("variances must be positive")


def kl_gaussian(mu1, var1, mu2, var2):
    """``KL(N(mu1, var1) || N(mu2, var2))``; vectorized over array inputs."""
    _check_var(var1, var2)
    mu1, var1, mu2, var2 = map(np.asarray, (mu1, var1, mu2, var2))
    out = 0.5 * np.log(var2 / var1) + (var1 + (mu1 - mu2) ** 2) / (2.0 * var2) - 0.5
    return np.maximum(out, 0.0)[()]


def renyi_gaussian(alpha, mu1, var1, mu2, var2):
    """Order-``alpha`` Renyi divergence ``D_alpha(N(mu1, var1) || N(mu2, var2))``."""
    if not 0.0 < alpha < 1.0:
        raise DivergenceError(f"alpha must lie in (0, 1), got {alpha}")
    _check_var(var1, var2)
    mu1, var1, mu2, var2 = map(np.asarray, (mu1, var1, mu2, var2))
    mixed = alpha * var2 + (1.0 - alpha) * var1
    log_ratio = np.log(mixed) - (1.0 - alpha) * np.log(var1) - alpha * np.log(var2)
    out = alpha * (mu1 - mu2) ** 2 / (2.0 * mixed) + log_ratio / (2.0 * (1.0 - alpha))
    return np.maximum(out, 0.0)[()]


def _log_affinity(mu1, var1, mu2, var2):
    # log int sqrt(p q) = -D_{1/2} / 2
    return -0.5 * renyi_gaussian(0.5, mu1, var1, mu2, var2)


def hellinger_sq_gaussian(mu1, var1, mu2, var2):
    """Squared Hellinger distance ``int (sqrt p - sqrt q)^2`` in ``[0, 2]``."""
    _check_var(var1, var2)
    return np.clip(-2.0 * np.expm1(_log_affinity(mu1, var1, mu2, var2)), 0.0, 2.0)[()]


def _crossings(mu1, var1, mu2, var2):
    """Points where the two normal densities are equal."""
    s1, s2 = math.sqrt(var1), math.sqrt(var2)
    if math.isclose(var1, var2, rel_tol=1e-14):
        return [] if mu1 == mu2 else [0.5 * (mu1 + mu2)]
    # log p - log q = 0 is a quadratic in x
    qa = 0.5 / var2 - 0.5 / var1
    qb = mu1 / var1 - mu2 / var2
    qc = 0.5 * mu2**2 / var2 - 0.5 * mu1**2 / var1 + math.log(s2 / s1)
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0:
        return []
    r = math.sqrt(disc)
    return sorted([(-qb - r) / (2.0 * qa), (-qb + r) / (2.0 * qa)])


def tv_gaussian_exact(mu1, var1, mu2, var2) -> float:
    """Total variation from normal CDFs evaluated at the density crossings."""
    _check_var(var1, var2)
    cuts = [-math.inf, *_crossings(mu1, var1, mu2, var2), math.inf]
    s1, s2 = math.sqrt(var1), math.sqrt(var2)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        p = ndtr((hi - mu1) / s1) - ndtr((lo - mu1) / s1)
        q = ndtr((hi - mu2) / s2) - ndtr((lo - mu2) / s2)
        total += abs(p - q)
    return min(max(0.5 * total, 0.0), 1.0)


def tv_gaussian(mu1, var1, mu2, var2, tol: float = 1e-12) -> float:
    """Total variation ``0.5 int |p - q|`` by adaptive Gauss-Kronrod quadrature.

    The integration range is split at the density crossings so each piece is
    smooth. Raises :class:`DivergenceError` if quadrature does not converge.
    """
    _check_var(var1, var2)
    s1, s2 = math.sqrt(var1), math.sqrt(var2)
    lo = min(mu1 - 40 * s1, mu2 - 40 * s2)
    hi = max(mu1 + 40 * s1, mu2 + 40 * s2)
    cuts = [lo, *[c for c in _crossings(mu1, var1, mu2, var2) if lo < c < hi], hi]
    c1 = 1.0 / (s1 * math.sqrt(2 * math.pi))
    c2 = 1.0 / (s2 * math.sqrt(2 * math.pi))

    def integrand(x):
        return abs(c1 * math.exp(-0.5 * (x - mu1) ** 2 / var1) - c2 * math.exp(-0.5 * (x - mu2) ** 2 / var2))

    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        # split each piece around the means so the peaks are not missed
        pts = sorted({a, b, *[m for m in (mu1, mu2) if a < m < b]})
        for u, v in zip(pts[:-1], pts[1:]):
            val, err, *rest = integrate.quad(integrand, u, v, epsabs=tol, epsrel=1e-12, limit=200, full_output=1)
            if len(rest) > 1 and err > 1e-8:
                raise DivergenceError(f"TV quadrature did not converge on [{u}, {v}]: {rest[1]}")
            total += val
    return min(max(0.5 * total, 0.0), 1.0)


def _tv_vectorized(mu1, var1, mu2, var2):
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    mu2 = np.broadcast_to(np.asarray(mu2, dtype=float), mu1.shape)
    if not math.isclose(var1, var2, rel_tol=1e-14):
        return np.array([tv_gaussian_exact(a, var1, b, var2) for a, b in zip(mu1, mu2)])
    # equal variances: TV = 2 Phi(|dmu| / (2 s)) - 1
    return 2.0 * ndtr(np.abs(mu1 - mu2) / (2.0 * math.sqrt(var1))) - 1.0


def conditional_divergence(kind: DivergenceKind, proj, var, var0):
    """Divergence of ``N(x^T theta, var)`` from ``N(x^T theta0, var0)`` given ``x^T (theta - theta0) = proj``."""
    proj = np.asarray(proj, dtype=float)
    zero = np.zeros_like(proj)
    if kind.name == KL:
        return kl_gaussian(proj, var, zero, var0)
    if kind.name == RENYI:
        return renyi_gaussian(kind.alpha, proj, var, zero, var0)
    if kind.name == HELLINGER_SQ:
        return hellinger_sq_gaussian(proj, var, zero, var0)
    return _tv_vectorized(proj, var, zero, var0)


def lift_joint(kind: DivergenceKind, cond: np.ndarray):
    """Combine conditional divergences at ``m`` design draws into a joint value and its standard error."""
    cond = np.asarray(cond, dtype=float)
    m = cond.shape[-1]
    if kind.name != RENYI:
        return cond.mean(axis=-1), cond.std(axis=-1, ddof=1) / math.sqrt(m)
    a = kind.alpha
    # E_X exp((a - 1) D) computed in log space
    logs = (a - 1.0) * cond
    log_mean = logsumexp(logs, axis=-1) - math.log(m)
    if np.any(~np.isfinite(log_mean)):
        raise DivergenceError("log-mean-exp underflow in joint Renyi lift")
    value = log_mean / (a - 1.0)
    # delta method on the mean of w = exp(logs - max)
    shift = logs.max(axis=-1, keepdims=True)
    w = np.exp(logs - shift)
    wbar = w.mean(axis=-1)
    se_w = w.std(axis=-1, ddof=1) / math.sqrt(m)
    se = se_w / (wbar * (1.0 - a))
    return np.maximum(value, 0.0), se


def joint_divergence(
    kind: DivergenceKind,
    point: ParameterPoint,
    truth: ParameterPoint,
    design: DesignSpec,
    m: int = 10_000,
    seed=0,
) -> DivergenceEstimate:
    """Divergence between the joint laws of ``(Y, X)`` under ``point`` and ``truth``.

    KL, squared Hellinger and TV are design averages of the conditional
    divergences; the Renyi divergence is lifted through
    ``1/(alpha - 1) log E_X exp((alpha - 1) D_alpha(cond))``.
    """
    if m < 1000:
        raise DivergenceError(f"need m >= 1000 design draws, got {m}")
    delta = point.theta - truth.theta
    if not np.any(delta) and point.sigma == truth.sigma:
        return DivergenceEstimate(0.0, 0.0, "exact", m)
    proj = design.sample_projections(delta, m, make_rng(seed))[0]
    cond = conditional_divergence(kind, proj, point.sigma_sq, truth.sigma_sq)
    value, se = lift_joint(kind, cond)
    value = float(value)
    if kind.name == HELLINGER_SQ:
        value = min(value, 2.0)
    elif kind.name == TV:
        value = min(value, 1.0)
    return DivergenceEstimate(value, float(se), "monte_carlo_over_x", m)


def variance_log_ratio_conditional(mu, var, mu0, var0):
    """``Var_{p0} log(p0 / p)`` for ``p = N(mu, var)``, ``p0 = N(mu0, var0)``."""
    _check_var(var, var0)
    return var0 * (np.asarray(mu0) - mu) ** 2 / var**2 + (var - var0) ** 2 / (2.0 * var**2)


def variance_log_ratio(point: ParameterPoint, truth: ParameterPoint, design: DesignSpec, m: int = 10_000, seed=0):
    """Design average of the conditional variance of ``log(p0/p)``.

    ``(sigma^2 - sigma0^2)^2 / (2 sigma^4) + sigma0^2 E_X[(X^T (theta - theta0))^2] / sigma^4``
    with the design expectation estimated from ``m`` draws.
    """
    if m < 1000:
        raise DivergenceError(f"need m >= 1000 design draws, got {m}")
    delta = point.theta - truth.theta
    proj = design.sample_projections(delta, m, make_rng(seed))[0]
    per_x = variance_log_ratio_conditional(proj, point.sigma_sq, 0.0, truth.sigma_sq)
    return DivergenceEstimate(float(per_x.mean()), float(per_x.std(ddof=1) / math.sqrt(m)), "monte_carlo_over_x", m)


def kappa_alpha(alpha: float) -> float:
    """``2(alpha+1)/(1-alpha)`` on ``[0.5, 1)``, ``2(alpha+1)/alpha`` on ``(0, 0.5)``."""
    if not 0.0 < alpha < 1.0:
        raise DivergenceError(f"alpha must lie in (0, 1), got {alpha}")
    if alpha >= 0.5:
        return 2.0 * (alpha + 1.0) / (1.0 - alpha)
    return 2.0 * (alpha + 1.0) / alpha


@dataclass(frozen=True)
class CompatibilityNumbers:
    phi1: float
    phi2: float


def compatibility_numbers(gram, s: int, directions: int = 10_000, seed=0) -> CompatibilityNumbers:
    """Restricted curvature constants of ``gram`` over ``s``-sparse vectors.

    ``phi2`` is exact: the smallest eigenvalue over all ``s x s`` principal
    submatrices (smaller supports are covered by eigenvalue interlacing).
    ``phi1`` is an upper estimate of
    ``inf theta^T G theta ||theta||_0 / ||theta||_1^2`` from random sparse
    directions plus each support's extreme eigenvector.
    """
    gram = np.asarray(gram, dtype=float)
    d = gram.shape[0]
    if gram.shape != (d, d) or not np.allclose(gram, gram.T, atol=1e-12):
        raise DivergenceError("gram must be a symmetric square matrix")
    if not 1 <= s <= d:
        raise DivergenceError(f"need 1 <= s <= d, got s={s}, d={d}")
    if d > 20:
        raise DivergenceError(f"support enumeration limited to d <= 20, got d={d}")
    rng = make_rng(seed)
    phi2 = math.inf
    phi1 = math.inf
    for support in itertools.combinations(range(d), s):
        sub = gram[np.ix_(support, support)]
        evals, evecs = np.linalg.eigh(sub)
        phi2 = min(phi2, float(evals[0]))
        cand = np.vstack([evecs.T, rng.standard_normal((directions, s))])
        quad = np.einsum("ij,jk,ik->i", cand, sub, cand)
        k = np.count_nonzero(np.abs(cand) > 0, axis=1)
        l1 = np.abs(cand).sum(axis=1)
        phi1 = min(phi1, float(np.min(quad * k / l1**2)))
    return CompatibilityNumbers(phi1=phi1, phi2=phi2)
