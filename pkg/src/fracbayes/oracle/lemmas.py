"""Numerical checks of the supporting inequalities.

Every check returns a :class:`LemmaCheckResult`. Monte-Carlo inequalities
pass only with a three-standard-error margin. Checks that involve an
unspecified universal constant compare against a constant frozen in
``constants.json`` (see :mod:`fracbayes.calibration`).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from ..constants import load_constants
from ..divergences import (
    DivergenceKind,
    conditional_divergence,
    variance_log_ratio_conditional,
)
from ..model import DesignSpec, ParameterPoint
from ..priors import (
    InvGammaPrior,
    SpikeSlabPrior,
    default_spike_slab_prior,
    prior_mass_ball,
    sample_student_coordinates,
    student_coordinate_log_density,
)
from ..rng import make_rng

SE_MARGIN = 3.0
PASSED = "passed"
FAILED = "failed"
SKIPPED = "precondition-skipped"
ERROR = "error"
IDENTITY_ID = "identity"


class PreconditionError(ValueError):
    """A check was asked to run outside the regime where its inequality is claimed."""


@dataclass
class LemmaCheckResult:
    lemma_id: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    mc_std_error: float
    config_digest: str
    status: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = PASSED if self.passed else FAILED

    def csv_row(self) -> list:
        return [
            self.lemma_id,
            repr(float(self.lhs)),
            repr(float(self.rhs)),
            repr(float(self.margin)),
            self.status,
            repr(float(self.mc_std_error)),
            self.config_digest,
        ]


CSV_HEADER = ["lemma_id", "lhs", "rhs", "margin", "passed", "se", "digest"]


def config_digest(lemma_id: str, **params) -> str:
    payload = json.dumps({"lemma": lemma_id, **params}, sort_keys=True, default=_jsonable)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return repr(obj)


def skipped(lemma_id: str, reason: str, **params) -> LemmaCheckResult:
    return LemmaCheckResult(
        lemma_id, math.nan, math.nan, math.nan, False, math.nan, config_digest(lemma_id, **params), SKIPPED,
        {"reason": reason},
    )


def _upper_bound_result(lemma_id, lhs, se, rhs, digest, details=None):
    margin = rhs - (lhs + SE_MARGIN * se)
    return LemmaCheckResult(lemma_id, lhs, rhs, margin, bool(margin >= 0), se, digest, details=details or {})


def _lower_bound_result(lemma_id, estimate, se, bound, digest, details=None):
    margin = (estimate - SE_MARGIN * se) - bound
    return LemmaCheckResult(lemma_id, estimate, bound, margin, bool(margin >= 0), se, digest, details=details or {})


# translated prior -------------------------------------------------------------


def sample_translated_offsets(tau: float, d: int, size: int, rng, radius: Optional[float] = None):
    """Draw ``u = theta - theta0`` from the untruncated product prior restricted to ``||u||_1 <= radius``.

    Returns ``(draws, acceptance)``; ``radius`` defaults to ``2 d tau``.
    """
    radius = 2.0 * d * tau if radius is None else radius
    out = np.empty((size, d))
    filled = tried = 0
    batch = max(1024, size)
    while filled < size:
        u = sample_student_coordinates(tau, (batch, d), rng)
        ok = np.abs(u).sum(axis=1) <= radius
        tried += batch
        k = min(int(ok.sum()), size - filled)
        out[filled : filled + k] = u[ok][:k]
        filled += k
        if tried > 1000 * size:
            raise PreconditionError("translated prior rejection sampler stalled")
    return out, filled / tried


def _log_prob_with_se(hits, total):
    p = hits / total
    if p <= 0:
        return -math.inf, math.inf
    return math.log(p), math.sqrt(max(1.0 - p, 0.0) / (p * total))


def verify_kl_translation(tau: float, c1: float, theta0, mc_samples: int = 100_000, seed=0) -> LemmaCheckResult:
    """``KL(p0, pi) <= 4 s log(c1 / (tau s)) + log 2`` for the translated, l1-restricted prior ``p0``.

    ``KL(p0, pi) = E_u[log f(u) - log f(u + theta0)] - log P_f(B(2 d tau)) + log P_f(B(c1))``
    with ``f`` the untruncated product density and ``u ~ p0 - theta0``; every
    term is a Monte-Carlo average. ``s = max(||theta0||_0, 1)``.
    """
    theta0 = np.asarray(theta0, dtype=float)
    d = theta0.shape[0]
    params = dict(tau=tau, c1=c1, theta0=theta0, mc_samples=mc_samples, seed=seed)
    digest = config_digest("A.1", **params)
    if float(np.abs(theta0).sum()) > c1 - 2.0 * d * tau:
        raise PreconditionError(f"need ||theta0||_1 <= c1 - 2 d tau = {c1 - 2 * d * tau}")
    rng = make_rng(seed, 1)
    u, _ = sample_translated_offsets(tau, d, mc_samples, rng)
    g = (student_coordinate_log_density(u, tau) - student_coordinate_log_density(u + theta0, tau)).sum(axis=1)
    # probability of the small ball under the untruncated product law
    probe = sample_student_coordinates(tau, (mc_samples, d), make_rng(seed, 2))
    l1 = np.abs(probe).sum(axis=1)
    log_small, se_small = _log_prob_with_se(int((l1 <= 2.0 * d * tau).sum()), mc_samples)
    log_big, se_big = _log_prob_with_se(int((l1 <= c1).sum()), mc_samples)
    lhs = float(g.mean()) - log_small + log_big
    se = math.sqrt(g.var(ddof=1) / mc_samples + se_small**2 + se_big**2)
    s = max(int(np.count_nonzero(theta0)), 1)
    rhs = 4.0 * s * math.log(c1 / (tau * s)) + math.log(2.0)
    return _upper_bound_result("A.1", lhs, se, rhs, digest, {"s_star": s})


def verify_second_moment(tau: float, d: int, mc_samples: int = 100_000, seed=0) -> LemmaCheckResult:
    """``int ||theta - theta0||^2 p0(d theta) <= 4 d tau^2`` for ``d >= 2``."""
    if d < 2:
        raise PreconditionError("second-moment bound needs d >= 2")
    digest = config_digest("A.2", tau=tau, d=d, mc_samples=mc_samples, seed=seed)
    u, _ = sample_translated_offsets(tau, d, mc_samples, make_rng(seed, 1))
    sq = (u**2).sum(axis=1)
    lhs, se = float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(mc_samples))
    return _upper_bound_result("A.2", lhs, se, 4.0 * d * tau**2, digest)


# scalar inequalities ----------------------------------------------------------


def pati_h(x, beta):
    x = np.asarray(x, dtype=float)
    return np.log(x) - (x - 1.0) + beta * (x - 1.0) ** 2 / 2.0


def verify_pati_inequality(epsilon_grid: Sequence[float], points: int = 100_000, x_max: float = 1e3):
    """``log x - (x - 1) + beta (x - 1)^2 / 2 >= 0`` on ``[eps, x_max]`` with ``beta = 8 log(1/eps)``."""
    eps_list = [float(e) for e in epsilon_grid]
    digest = config_digest("A.3", epsilon_grid=eps_list, points=points, x_max=x_max)
    if any(not 0.0 < e < 0.5 for e in eps_list):
        raise PreconditionError("every epsilon must lie in (0, 1/2)")
    worst = math.inf
    for eps in eps_list:
        x = np.unique(np.concatenate([np.geomspace(eps, x_max, points), [1.0]]))
        worst = min(worst, float(pati_h(x, 8.0 * math.log(1.0 / eps)).min()))
    margin = worst + 1e-12
    return LemmaCheckResult("A.3", worst, 0.0, margin, bool(margin >= 0), 0.0, digest, details={"tolerance": 1e-12})


def kl_term(sigma_sq, sigma0_sq):
    r = np.asarray(sigma0_sq) / np.asarray(sigma_sq)
    return -np.log(r) + r - 1.0


def variance_band(sigma_min: float, sigma_max: float):
    """The admissible ``sigma0^2`` band ``((2 sigma_min)^{-1}, (2 sigma_max)^{-1})``."""
    return 1.0 / (2.0 * sigma_min), 1.0 / (2.0 * sigma_max)


def verify_kl_term_bound(sigma_min: float, sigma_max: float, eta_grid, seed=0, samples: int = 10_000):
    """Fit the constant in ``log(s2/s0) + s0/s2 - 1 <= K log(rho) eta^2 sigma_min^2``.

    ``sigma0^2`` is drawn from the admissible band and ``sigma^2`` within
    ``eta`` of it; ``rho = 2 sigma_min / sigma_max``. The reported ``lhs`` is
    the fitted ``K``; ``rhs`` is the constant 64 implied by the scalar
    log-inequality with ``beta = 8 log rho``. Passing requires a finite fitted
    ``K`` no larger than that and the side claim
    ``sigma^2 >= sigma_min^{-1} / 4`` on every sample.
    """
    eta_grid = [float(e) for e in eta_grid]
    digest = config_digest("A.4", sigma_min=sigma_min, sigma_max=sigma_max, eta_grid=eta_grid, seed=seed)
    lo, hi = variance_band(sigma_min, sigma_max)
    if not lo < hi:
        raise PreconditionError("need sigma_max < sigma_min so the band is non-empty")
    if any(not (0 < eta and eta / lo < 0.5) for eta in eta_grid):
        raise PreconditionError(f"every eta must satisfy eta / {lo:g} < 1/2")
    rng = make_rng(seed)
    rho = 2.0 * sigma_min / sigma_max
    fitted = 0.0
    side_ok = True
    per_eta = {}
    for eta in eta_grid:
        s0 = rng.uniform(lo, hi, samples)
        s2 = s0 + rng.uniform(-eta, eta, samples)
        side_ok &= bool(np.all(s2 >= 1.0 / (4.0 * sigma_min)))
        ratio = kl_term(s2, s0) / (math.log(rho) * eta**2 * sigma_min**2)
        k = float(ratio.max())
        per_eta[repr(eta)] = k
        fitted = max(fitted, k)
    analytic = 64.0
    passed = math.isfinite(fitted) and side_ok and fitted <= analytic
    return LemmaCheckResult(
        "A.4", fitted, analytic, analytic - fitted, passed, 0.0, digest,
        details={"side_claim": side_ok, "k_per_eta": per_eta, "rho": rho},
    )


# inverse-gamma mass -------------------------------------------------------------


def ig_interval_mass(shape: float, rate: float, center: float, eta: float) -> float:
    """``P(|sigma^2 - center| < eta)`` for ``sigma^2 ~ IG(shape, rate)`` by adaptive quadrature."""
    lo, hi = max(center - eta, 0.0), center + eta
    log_norm = shape * math.log(rate) - float(gammaln(shape))
    # integrate in u = log x to tame the shape of the integrand
    def integrand(u):
        return math.exp(log_norm - shape * u - rate * math.exp(-u))

    a = math.log(lo) if lo > 0 else math.log(rate) - 60.0
    peak = math.log(rate / shape)
    pts = [p for p in (peak,) if a < p < math.log(hi)]
    val, err = integrate.quad(integrand, a, math.log(hi), points=pts or None, epsabs=1e-300, epsrel=1e-10, limit=200)
    if not np.isfinite(val) or err > 1e-6 * max(val, 1e-300) + 1e-14:
        raise ArithmeticError(f"inverse-gamma interval quadrature failed (value={val}, err={err})")
    return val


def verify_ig_mass(a: float, sigma0_sq: float, eta: float) -> LemmaCheckResult:
    """``-log P_IG(a, eta)(|sigma^2 - sigma0^2| < eta) <= log(e 2^{a+1} Gamma(a) / eta^a)``."""
    digest = config_digest("A.5", a=a, sigma0_sq=sigma0_sq, eta=eta)
    if not (a > 0 and eta > 0):
        raise PreconditionError("need a > 0 and eta > 0")
    mass = ig_interval_mass(a, eta, sigma0_sq, eta)
    lhs = -math.log(mass) if mass > 0 else math.inf
    rhs = 1.0 + (a + 1.0) * math.log(2.0) + float(gammaln(a)) - a * math.log(eta)
    return _upper_bound_result("A.5", lhs, 0.0, rhs, digest, {"mass": mass})


def n_dependent_mass_constant(n: int, alpha: float, a: float, b: float, sigma0_sq: float, eta: float) -> float:
    """``K = -log P(|s - sigma0^2| < eta) / (n eta)`` for ``s ~ IG(n(1 - alpha)/2 + a, alpha b)``."""
    prior = InvGammaPrior(a, b, n_dependent=(n, alpha))
    mass = ig_interval_mass(prior.shape, prior.rate, sigma0_sq, eta)
    return -math.log(mass) / (n * eta) if mass > 0 else math.inf


def verify_ig_mass_n_dependent(
    n: int, a: float, b: float, sigma0_sq: float, eta: float, t: float = 2.0, k_committed: Optional[float] = None
) -> LemmaCheckResult:
    """Interval mass of the n-dependent prior against ``exp(-K n eta)`` with ``alpha = 1 - 1/(log n)^t``."""
    alpha = 1.0 - 1.0 / math.log(n) ** t
    digest = config_digest("A.6", n=n, a=a, b=b, sigma0_sq=sigma0_sq, eta=eta, t=t)
    k_committed = load_constants()["ig_n_dependent_K"] if k_committed is None else k_committed
    prior = InvGammaPrior(a, b, n_dependent=(n, alpha))
    mass = ig_interval_mass(prior.shape, prior.rate, sigma0_sq, eta)
    k_hat = -math.log(mass) / (n * eta) if mass > 0 else math.inf
    bound = math.exp(-k_committed * n * eta)
    res = _lower_bound_result("A.6", mass, 0.0, bound, digest, {"k_fitted": k_hat, "k_committed": k_committed, "alpha": alpha})
    return res


# variance identity / Hellinger lower bound ---------------------------------------


def verify_variance_identity(trials: int = 20, seed=0, draws: int = 100_000, tolerance: float = 0.03):
    """Closed-form ``Var_{p0} log(p0/p)`` against the sample variance over ``draws`` draws."""
    if trials < 10:
        raise PreconditionError("need at least 10 trials")
    digest = config_digest("A.7", trials=trials, seed=seed, draws=draws)
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(trials):
        mu, mu0 = rng.uniform(-2.0, 2.0, 2)
        var, var0 = rng.uniform(0.5, 2.0, 2)
        u = mu0 + math.sqrt(var0) * rng.standard_normal(draws)
        log_ratio = (-0.5 * (u - mu0) ** 2 / var0 - 0.5 * math.log(var0)) - (-0.5 * (u - mu) ** 2 / var - 0.5 * math.log(var))
        exact = float(variance_log_ratio_conditional(mu, var, mu0, var0))
        worst = max(worst, abs(float(log_ratio.var(ddof=1)) - exact) / exact)
    return LemmaCheckResult("A.7", worst, tolerance, tolerance - worst, bool(worst < tolerance), 0.0, digest)


def hellinger_ratio_samples(design: DesignSpec, band, trials: int, seed, m: int = 4096, max_denominator: float = 0.25):
    """Sampled ratios ``H^2_joint / (E_X[(X^T delta)^2] + (sigma - sigma0)^2)`` near the truth."""
    rng = make_rng(seed)
    hel = DivergenceKind.hellinger_sq()
    lo, hi = band
    ratios = []
    while len(ratios) < trials:
        sigma0_sq = rng.uniform(lo, hi)
        sigma0 = math.sqrt(sigma0_sq)
        scale = math.sqrt(max_denominator) * rng.uniform(0.01, 1.0)
        direction = rng.standard_normal(design.d + 1)
        direction *= scale / np.linalg.norm(direction)
        delta, dsig = direction[:-1], direction[-1]
        sigma = sigma0 + dsig
        if sigma <= 0:
            continue
        pred = design.projection_second_moment(delta) if design.is_isotropic else None
        proj = design.sample_projections(delta, m, rng)[0]
        if pred is None:
            pred = float((proj**2).mean())
        denom = pred + dsig**2
        if denom == 0 or denom > max_denominator:
            continue
        h2 = float(conditional_divergence(hel, proj, sigma**2, sigma0_sq).mean())
        ratios.append(h2 / denom)
    return np.array(ratios)


def verify_hellinger_lower_bound(trials: int = 1000, seed=0, design: Optional[DesignSpec] = None, band=(0.5, 2.0)):
    """Positive empirical constant in ``H^2 >= K (E_X[(X^T delta)^2] + (sigma - sigma0)^2)``."""
    if trials < 1000:
        raise PreconditionError("need at least 1000 trials")
    design = design or DesignSpec.unit_sphere(10)
    digest = config_digest("A.8", trials=trials, seed=seed, design=design.to_dict(), band=list(band))
    ratios = hellinger_ratio_samples(design, band, trials, seed)
    k_hat = float(ratios.min())
    return LemmaCheckResult("A.8", k_hat, 0.0, k_hat, bool(k_hat > 0), 0.0, digest, details={"median_ratio": float(np.median(ratios))})


# spike-and-slab mass ---------------------------------------------------------------


def spike_slab_rate_term(s_star: int, d: int, p: float, delta: float) -> float:
    return max(s_star, 1) * math.log(math.sqrt(d) / (p * delta))


def spike_slab_ball_mass(theta0, delta: float, v1: float, n: int, d: int, seed, mc_samples: int = 200_000, v0=None):
    prior = default_spike_slab_prior(n, d, v1=v1, v0=v0)
    return prior, prior_mass_ball(prior, theta0, delta, "L2", mc_samples, seed)


def verify_spike_slab_mass(
    theta0, delta: float, v1: float, n: int, d: int, seed=0, mc_samples: int = 200_000,
    k_committed: Optional[float] = None, v0: Optional[float] = None,
) -> LemmaCheckResult:
    """``pi({||theta - theta0||^2 <= delta^2}) >= exp(-K s log(sqrt(d) / (p delta)))``.

    Uses ``p = 1 - exp(-1/d)`` and ``v0 = 1/(2 n d log 2)`` unless ``v0`` is
    given; ``K`` is the committed calibration constant for ``v1``.
    """
    theta0 = np.asarray(theta0, dtype=float)
    params = dict(theta0=theta0, delta=delta, v1=v1, n=n, d=d, seed=seed, mc_samples=mc_samples, v0=v0)
    digest = config_digest("A.9", **params)
    if float(np.linalg.norm(theta0)) > 1.0 or not 0.0 < delta < 1.0:
        raise PreconditionError("need ||theta0||_2 <= 1 and delta in (0, 1)")
    if k_committed is None:
        k_committed = load_constants()["spike_slab_K"][_v1_key(v1)]
    if default_spike_slab_prior(n, d, v1=v1, v0=v0).v0 > delta**2 / (2.0 * d * math.log(2.0)):
        raise PreconditionError("need v0 <= delta^2 / (2 d log 2) so the spike sits inside the ball")
    prior, est = spike_slab_ball_mass(theta0, delta, v1, n, d, seed, mc_samples, v0)
    s = int(np.count_nonzero(theta0))
    bound = math.exp(-k_committed * spike_slab_rate_term(s, d, prior.p, delta))
    return _lower_bound_result("A.9", est.estimate, est.std_error, bound, digest, {"k_committed": k_committed, "p": prior.p, "v0": prior.v0})


def _v1_key(v1: float) -> str:
    return f"{float(v1):g}"


# fractional / regular identity ---------------------------------------------------------


def verify_fractional_identity(data, prior, a: float, b: float, alpha: float, n_points: int = 20, seed=0):
    """Check that the regular posterior equals the tempered posterior of ``(theta, sigma_*)``.

    With ``sigma_*^2 = alpha sigma^2`` and the prior
    ``IG(n(1 - alpha)/2 + a, alpha b)`` on ``sigma_*^2``, log-density
    differences between random point pairs must agree to 1e-8.
    """
    from ..samplers.functionals import log_posterior_unnormalized

    if not 0.0 < alpha < 1.0:
        raise PreconditionError("alpha must lie in (0, 1)")
    digest = config_digest(IDENTITY_ID, n=data.n, d=data.d, seed_data=data.seed, a=a, b=b, alpha=alpha, n_points=n_points, seed=seed)
    rng = make_rng(seed)
    ig = InvGammaPrior(a, b)
    ig_star = InvGammaPrior(a, b, n_dependent=(data.n, alpha))
    worst = 0.0
    for _ in range(n_points):
        pts = []
        for _ in range(2):
            theta = 0.5 * rng.standard_normal(data.d)
            sigma = rng.uniform(0.3, 3.0)
            pts.append((theta, sigma))
        (t1, s1), (t2, s2) = pts
        regular = log_posterior_unnormalized(data, prior, ig, ParameterPoint(t1, s1), 1.0) - log_posterior_unnormalized(
            data, prior, ig, ParameterPoint(t2, s2), 1.0
        )
        root = math.sqrt(alpha)
        tempered = log_posterior_unnormalized(data, prior, ig_star, ParameterPoint(t1, root * s1), alpha) - (
            log_posterior_unnormalized(data, prior, ig_star, ParameterPoint(t2, root * s2), alpha)
        )
        worst = max(worst, abs(regular - tempered))
    tol = 1e-8
    return LemmaCheckResult(IDENTITY_ID, worst, tol, tol - worst, bool(worst < tol), 0.0, digest)


# suite ------------------------------------------------------------------------------


def _identity_check(n: int, d: int, a: float, b: float, alpha: float, n_points: int = 20, seed=0, tau: float = 0.1):
    from ..model import generate_dataset, sparse_truth
    from ..priors import ScaledStudentPrior

    design = DesignSpec.gaussian_iso(d, 1.0)
    data = generate_dataset(design, n, sparse_truth(d, min(2, d)), 1.0, seed)
    return verify_fractional_identity(data, ScaledStudentPrior(tau, 1e6, d), a, b, alpha, n_points, seed)


def _kl_translation(tau: float, c1: float, d: int, s_star: int, mc_samples: int = 100_000, seed=0):
    from ..model import sparse_truth

    return verify_kl_translation(tau, c1, sparse_truth(d, s_star), mc_samples, seed)


def _hellinger(trials: int = 1000, seed=0, design: Optional[dict] = None, band=(0.5, 2.0)):
    spec = DesignSpec.from_dict(design) if design else None
    return verify_hellinger_lower_bound(trials, seed, spec, tuple(band))


def _spike_slab(d: int, s_star: int, delta: float, v1: float = 1.0, n: int = 100, seed=0, mc_samples: int = 200_000):
    from ..model import sparse_truth

    return verify_spike_slab_mass(sparse_truth(d, s_star), delta, v1, n, d, seed, mc_samples)


CHECKS = {
    "A.1": _kl_translation,
    "A.2": verify_second_moment,
    "A.3": verify_pati_inequality,
    "A.4": verify_kl_term_bound,
    "A.5": verify_ig_mass,
    "A.6": verify_ig_mass_n_dependent,
    "A.7": verify_variance_identity,
    "A.8": _hellinger,
    "A.9": _spike_slab,
    IDENTITY_ID: _identity_check,
}


def default_suite() -> dict:
    """The committed default grid: lemma id -> list of keyword-argument dicts.

    Assertion seeds here are disjoint from the calibration seeds used to
    fit the constants in ``constants.json``.
    """
    return {
        "A.1": [
            dict(tau=1e-3, c1=1e6, d=20, s_star=3, seed=11),
            dict(tau=1e-3, c1=1e6, d=20, s_star=0, seed=12),
            dict(tau=1e-3, c1=2.0, d=20, s_star=3, seed=13),
        ],
        "A.2": [dict(tau=0.01, d=10, seed=21), dict(tau=1e-3, d=50, seed=22)],
        "A.3": [dict(epsilon_grid=[0.001, 0.01, 0.1, 0.25, 0.49])],
        "A.4": [dict(sigma_min=1.0, sigma_max=0.25, eta_grid=[0.1, 0.01, 0.001], seed=41)],
        "A.5": [dict(a=2.0, sigma0_sq=s, eta=e) for s in (0.5, 1.0) for e in (0.1, 0.3)],
        "A.6": [dict(n=n, a=2.0, b=n**-0.5, sigma0_sq=s, eta=e) for n in (300, 1000) for s in (0.5, 1.0, 2.0) for e in (0.1, 0.3)],
        "A.7": [dict(trials=20, seed=71)],
        "A.8": [dict(trials=1000, seed=81)],
        "A.9": [
            dict(d=d, s_star=s, delta=delta, seed=91 + i)
            for i, (d, s, delta) in enumerate([(30, 2, 0.2), (10, 1, 0.4), (100, 3, 0.4), (30, 3, 0.2)])
        ],
        IDENTITY_ID: [dict(n=30, d=4, a=2.0, b=0.5, alpha=al, seed=101 + i) for i, al in enumerate((0.3, 0.7, 0.95))],
    }


def run_check(lemma_id: str, params: dict) -> LemmaCheckResult:
    """Run one check; precondition violations become ``precondition-skipped`` rows."""
    try:
        fn = CHECKS[lemma_id]
    except KeyError:
        raise KeyError(f"unknown lemma id {lemma_id!r}; known: {sorted(CHECKS)}") from None
    try:
        return fn(**params)
    except PreconditionError as exc:
        return skipped(lemma_id, str(exc), **params)
    except ArithmeticError as exc:
        digest = config_digest(lemma_id, **params)
        return LemmaCheckResult(lemma_id, math.nan, math.nan, math.nan, False, math.nan, digest, ERROR, {"error": str(exc)})


def run_lemma_suite(suite: Optional[dict] = None, only: Optional[Sequence[str]] = None) -> list:
    """Run every configured check in lemma-id order, optionally filtered by ``only``."""
    suite = default_suite() if suite is None else suite
    unknown = sorted(set(suite) - set(CHECKS))
    if unknown:
        raise KeyError(f"unknown lemma ids: {unknown}")
    wanted = list(suite) if only is None else [k for k in suite if k in set(only)]
    missing = sorted(set(only or ()) - set(suite))
    if missing:
        raise KeyError(f"--only names lemma ids not in the suite: {missing}")
    return [run_check(k, params) for k in wanted for params in suite[k]]


def suite_passed(results) -> bool:
    """True when no check failed; precondition-skipped rows do not count as failures."""
    return all(r.status in (PASSED, SKIPPED) for r in results)
