"""Misspecified-truth studies of the oracle inequality for the prediction risk.

The posterior prediction risk ``E_x[(X^T theta - f0(X))^2]`` and the oracle
term ``min_theta E_x[(X^T theta - f0(X))^2]`` are both computed on one large
common sample of design rows, on which the risk is an exact quadratic form
``theta^T G theta - 2 theta^T b + c``. The oracle minimizer is the
(ridge-stabilized) least-squares projection of ``f0`` onto linear functions,
or the Euclidean projection onto the l1 ball for a linear truth outside it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from ..constants import load_constants
from ..model import Dataset, ParameterPoint
from ..rng import derive_seed, make_rng, replicate_seed
from ..samplers import SamplerError
from .rates import CellResult, CheckResult, RateReport, ReplicateResult, study_truth
from .setup import ModelSetup, StudyConfigError, parallel_map

log = logging.getLogger(__name__)

NONLINEAR = "nonlinear"
OUTSIDE_L1_BALL = "outside_l1_ball"
LINKS = {"sin": np.sin, "tanh": np.tanh, "linear": lambda u: u}
RISK = "prediction_risk"
ORACLE = "oracle_term"


class ProjectionError(RuntimeError):
    """The oracle projection could not be computed."""


def project_l1_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{||x||_1 <= radius}`` (sort-and-threshold)."""
    v = np.asarray(v, dtype=float)
    if np.abs(v).sum() <= radius:
        return v.copy()
    u = np.sort(np.abs(v))[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    shift = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(np.abs(v) - shift, 0.0)


@dataclass(frozen=True)
class QuadraticRisk:
    """``R(theta) = theta^T G theta - 2 theta^T b + c`` on a fixed design sample."""

    gram: np.ndarray
    cross: np.ndarray
    const: float

    def __call__(self, theta) -> np.ndarray:
        theta = np.atleast_2d(theta)
        quad = np.einsum("ij,jk,ik->i", theta, self.gram, theta)
        return quad - 2.0 * theta @ self.cross + self.const


@dataclass(frozen=True)
class MisspecStudyConfig:
    """``truth_kind`` is ``"nonlinear"`` (``y = link(X^T theta0) + sigma0 eps``) or
    ``"outside_l1_ball"`` (linear truth scaled to ``||theta0||_1 = l1_scale * c1``,
    prior truncated at ``setup.c1``)."""

    n_grid: tuple
    d_grid: tuple
    s_grid: tuple
    truth_kind: str = NONLINEAR
    link: str = "sin"
    l1_scale: float = 2.0
    setup: ModelSetup = field(default_factory=ModelSetup)
    sigma0: float = 1.0
    replications: int = 10
    base_seed: int = 0
    oracle_samples: int = 100_000
    ridge: float = 1e-8
    max_draws: int = 500
    rate_constant: Optional[float] = None
    k_alpha: Optional[float] = None

    def __post_init__(self):
        for name in ("n_grid", "d_grid", "s_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.truth_kind not in (NONLINEAR, OUTSIDE_L1_BALL):
            raise StudyConfigError(f"unknown truth kind {self.truth_kind!r}")
        if self.truth_kind == NONLINEAR and self.link not in LINKS:
            raise StudyConfigError(f"unknown link {self.link!r}; choose from {sorted(LINKS)}")
        if self.truth_kind == OUTSIDE_L1_BALL and not self.l1_scale > 1:
            raise StudyConfigError("l1_scale must exceed 1 so the truth leaves the ball")
        if self.replications < 3:
            raise StudyConfigError("replications must be >= 3")
        if not self.sigma0 > 0:
            raise StudyConfigError("sigma0 must be positive")
        if self.oracle_samples < 1000:
            raise StudyConfigError("oracle_samples must be >= 1000")
        for n, d, s in self.grid():
            if not 1 <= s <= d or s >= n:
                raise StudyConfigError(f"cell (n={n}, d={d}, s*={s}) needs 1 <= s* < n and s* <= d")

    @classmethod
    def from_dict(cls, spec: dict) -> "MisspecStudyConfig":
        spec = dict(spec)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(spec) - known)
        if unknown:
            raise StudyConfigError(f"unknown misspec-study keys: {unknown}")
        spec["setup"] = ModelSetup.from_dict(spec.get("setup"))
        return cls(**spec)

    def grid(self):
        return [(n, d, s) for d in self.d_grid for s in self.s_grid for n in self.n_grid]

    @property
    def well_specified(self) -> bool:
        """A linear link is accepted as a degenerate control input."""
        return self.truth_kind == NONLINEAR and self.link == "linear"

    def truth_theta(self, d: int, s: int) -> np.ndarray:
        theta0 = study_truth(d, s)
        if self.truth_kind == OUTSIDE_L1_BALL:
            theta0 *= self.l1_scale * self.setup.c1 / np.abs(theta0).sum()
        return theta0

    def regression_function(self, d: int, s: int):
        theta0 = self.truth_theta(d, s)
        link = LINKS[self.link] if self.truth_kind == NONLINEAR else LINKS["linear"]
        return lambda x: link(x @ theta0)


def generate_misspecified_dataset(cfg: MisspecStudyConfig, n: int, d: int, s: int, seed) -> Dataset:
    """Fresh design and responses ``f0(X) + sigma0 eps`` (streams as in the well-specified generator)."""
    design = cfg.setup.design(d)
    x = design.sample_rows(n, make_rng(seed, 0))
    eps = make_rng(seed, 1).standard_normal(n)
    y = cfg.regression_function(d, s)(x) + cfg.sigma0 * eps
    return Dataset(x, y, design, int(seed), ParameterPoint(cfg.truth_theta(d, s), cfg.sigma0))


def quadratic_risk(cfg: MisspecStudyConfig, d: int, s: int, seed) -> QuadraticRisk:
    design = cfg.setup.design(d)
    rows = design.sample_rows(cfg.oracle_samples, make_rng(seed, 7))
    f0 = cfg.regression_function(d, s)(rows)
    m = rows.shape[0]
    return QuadraticRisk(rows.T @ rows / m, rows.T @ f0 / m, float(f0 @ f0 / m))


def oracle_minimizer(cfg: MisspecStudyConfig, risk: QuadraticRisk, d: int, s: int) -> np.ndarray:
    """Best parameter in the prior's l1 ball for the prediction risk."""
    if cfg.truth_kind == OUTSIDE_L1_BALL:
        if not cfg.setup.design(d).is_isotropic:
            raise ProjectionError("l1-ball projection oracle needs an isotropic design")
        return project_l1_ball(cfg.truth_theta(d, s), cfg.setup.c1)
    g = risk.gram + cfg.ridge * np.trace(risk.gram) / d * np.eye(d)
    try:
        theta = np.linalg.solve(g, risk.cross)
    except np.linalg.LinAlgError as exc:
        raise ProjectionError(f"least-squares projection failed: {exc}") from exc
    if np.abs(theta).sum() > cfg.setup.c1:
        raise ProjectionError("least-squares projection leaves the prior's l1 ball")
    return theta


def _misspec_replicate(task) -> ReplicateResult:
    cfg, cell_index, (n, d, s), rep, risk = task
    rep_seed = replicate_seed(cfg.base_seed, rep)
    data = generate_misspecified_dataset(cfg, n, d, s, derive_seed(rep_seed, cell_index, 0))
    try:
        chain = cfg.setup.run_chain(data, derive_seed(rep_seed, cell_index, 1))
    except (SamplerError, np.linalg.LinAlgError, ValueError) as exc:
        log.warning("misspec cell (n=%d, d=%d, s*=%d) replicate %d failed: %s", n, d, s, rep, exc)
        return ReplicateResult({}, error=str(exc))
    theta = chain.theta
    if len(chain) > cfg.max_draws:
        theta = theta[np.linspace(0, len(chain) - 1, cfg.max_draws).round().astype(int)]
    return ReplicateResult({RISK: float(risk(theta).mean())}, accept_rate=chain.accept_rate)


def committed_k_alpha(setup: ModelSetup) -> Optional[float]:
    key = f"{setup.constant_key()}/alpha_{setup.alpha}"
    return load_constants().get("misspec_K", {}).get(key)


def run_misspec_study(cfg: MisspecStudyConfig, jobs: int = 1) -> RateReport:
    """Posterior prediction risk against ``K_alpha (oracle term + eps_n)`` per cell."""
    from .rates import resolve_rate_constant

    report = RateReport(title=f"misspecification study ({cfg.truth_kind})")
    c = resolve_rate_constant(cfg, report.notes)
    k_alpha = cfg.k_alpha if cfg.k_alpha is not None else committed_k_alpha(cfg.setup)
    report.notes.append(f"rate constant c = {c!r}; K_alpha = {k_alpha!r}")
    if cfg.well_specified:
        report.notes.append("linear link: the truth is well specified and the oracle term is ~0")
    grid = cfg.grid()
    risks, oracles = [], []
    for ci, (n, d, s) in enumerate(grid):
        risk = quadratic_risk(cfg, d, s, derive_seed(cfg.base_seed, ci, 9))
        theta_star = oracle_minimizer(cfg, risk, d, s)
        risks.append(risk)
        oracles.append(float(risk(theta_star)[0]))
    tasks = [(cfg, ci, cell, rep, risks[ci]) for ci, cell in enumerate(grid) for rep in range(cfg.replications)]
    results = parallel_map(_misspec_replicate, tasks, jobs)
    for ci, (n, d, s) in enumerate(grid):
        reps = results[ci * cfg.replications : (ci + 1) * cfg.replications]
        failed = [r.error for r in reps if r.error is not None]
        report.failures.extend(f"cell (n={n}, d={d}, s*={s}): {m}" for m in failed)
        vals = np.array([r.values[RISK] for r in reps if r.error is None])
        mean = float(vals.mean()) if vals.size else math.nan
        se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.nan
        rate = cfg.setup.rate(n, d, s, c)
        oracle = oracles[ci]
        report.cells.append(CellResult(n, d, s, RISK, mean, se, rate, tuple(vals.tolist()), len(failed)))
        report.cells.append(CellResult(n, d, s, ORACLE, oracle, 0.0, rate, (), 0))
        label = f"[n={n},d={d},s*={s}]"
        report.checks.append(
            CheckResult(
                f"risk above oracle term {label}",
                bool(mean >= oracle - 3.0 * np.nan_to_num(se)),
                f"risk={mean:.5g}, oracle={oracle:.5g}, se={se:.3g}",
            )
        )
        if k_alpha is None:
            report.notes.append("no committed K_alpha for this setup; oracle inequality not asserted")
        else:
            bound = k_alpha * (oracle + rate)
            report.checks.append(
                CheckResult(f"oracle inequality {label}", bool(mean <= bound), f"risk={mean:.5g} <= {bound:.5g}")
            )
    report.checks.append(
        CheckResult("all cells completed", not report.failures, "; ".join(report.failures) or "no sampler failures")
    )
    report.notes = list(dict.fromkeys(report.notes))
    return report
