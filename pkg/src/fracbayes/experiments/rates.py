"""Rate-scaling studies: posterior risk over (n, d, s*) grids against ``epsilon_n``."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
from scipy import stats

from ..constants import load_constants
from ..model import generate_dataset, sparse_truth
from ..rng import derive_seed, replicate_seed
from ..samplers import Functional, SamplerError, chain_diagnostics, posterior_functional
from .setup import ModelSetup, StudyConfigError, parallel_map, renyi_label

log = logging.getLogger(__name__)

MAX_D = 2000
MAX_N = 1000


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    points: int


def fit_rate_slope(points) -> SlopeFit:
    """Ordinary least squares of ``log(observed)`` on ``log(predicted)``.

    ``points`` is a sequence of ``(predicted, observed)`` pairs.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be (predicted, observed) pairs")
    if arr.shape[0] < 3:
        raise ValueError(f"need at least 3 points, got {arr.shape[0]}")
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError("slope fit needs finite positive values")
    lx, ly = np.log(arr[:, 0]), np.log(arr[:, 1])
    if np.ptp(lx) == 0:
        raise ValueError("predicted values are all equal")
    res = stats.linregress(lx, ly)
    r2 = float(res.rvalue**2) if np.isfinite(res.rvalue) else 0.0
    return SlopeFit(float(res.slope), float(res.intercept), min(max(r2, 0.0), 1.0), int(arr.shape[0]))


@dataclass(frozen=True)
class CellResult:
    n: int
    d: int
    s_star: int
    metric: str
    mean: float
    se: float
    predicted_rate: float
    values: tuple = ()
    failures: int = 0


@dataclass(frozen=True)
class SlopeRow:
    metric: str
    axis: str
    slice: str
    fit: SlopeFit


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class RateReport:
    title: str = "rate study"
    cells: list = field(default_factory=list)
    slope_fits: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def cell(self, n, d, s_star, metric) -> CellResult:
        for c in self.cells:
            if (c.n, c.d, c.s_star, c.metric) == (n, d, s_star, metric):
                return c
        raise KeyError((n, d, s_star, metric))


@dataclass(frozen=True)
class RateStudyConfig:
    """Grid, truth and sampling settings of a rate study.

    ``assertions`` may hold ``"slope_n": {"metric", "range", "min_r_squared"}``
    (log-log slope against ``n`` on every ``(d, s*)`` slice) and
    ``"s_ratio": {"metric", "range"}`` (risk ratios between consecutive
    ``s*`` values on every ``(n, d)`` slice). ``rate_constant=None`` uses the
    committed constant for the setup, or 1 when none is committed.
    """

    n_grid: tuple
    d_grid: tuple
    s_grid: tuple
    setup: ModelSetup = field(default_factory=ModelSetup)
    sigma0: float = 1.0
    replications: int = 10
    metrics: tuple = ("sq_l2_error",)
    base_seed: int = 0
    functional_m: int = 10_000
    max_draws: int = 200
    renyi_order: Optional[float] = None
    rate_constant: Optional[float] = None
    assertions: dict = field(default_factory=dict)
    check_monotone: bool = True
    max_d: int = MAX_D
    max_n: int = MAX_N

    def __post_init__(self):
        for name in ("n_grid", "d_grid", "s_grid", "metrics"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not (self.n_grid and self.d_grid and self.s_grid):
            raise StudyConfigError("grids must be non-empty")
        if self.replications < 3:
            raise StudyConfigError(f"replications must be >= 3, got {self.replications}")
        if not self.sigma0 > 0:
            raise StudyConfigError("sigma0 must be positive")
        for n in self.n_grid:
            if n < 1 or n > self.max_n:
                raise StudyConfigError(f"n={n} outside [1, {self.max_n}]")
        for d in self.d_grid:
            if d < 1 or d > self.max_d:
                raise StudyConfigError(f"d={d} outside [1, {self.max_d}]")
        for n, d, s in self.grid():
            if not 0 <= s < n:
                raise StudyConfigError(f"cell (n={n}, d={d}, s*={s}) violates s* < n")
            if s > d:
                raise StudyConfigError(f"cell (n={n}, d={d}, s*={s}) has s* > d")
        for label in self.metrics:
            try:
                Functional.parse(label)
            except Exception as exc:
                raise StudyConfigError(f"bad metric {label!r}: {exc}") from exc
        if self.renyi_order is not None and not 0 < self.renyi_order < 1:
            raise StudyConfigError("renyi_order must lie in (0, 1)")
        unknown = sorted(set(self.assertions) - {"slope_n", "s_ratio"})
        if unknown:
            raise StudyConfigError(f"unknown assertions: {unknown}")

    @classmethod
    def from_dict(cls, spec: dict) -> "RateStudyConfig":
        spec = dict(spec)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(spec) - known)
        if unknown:
            raise StudyConfigError(f"unknown rate-study keys: {unknown}")
        spec["setup"] = ModelSetup.from_dict(spec.get("setup"))
        return cls(**spec)

    def grid(self):
        """Cells in deterministic order: ``d`` outermost, then ``s*``, then ``n``."""
        return [(n, d, s) for d in self.d_grid for s in self.s_grid for n in self.n_grid]

    @property
    def order(self) -> float:
        """Renyi order used for the divergence metric and the exceedance check."""
        if self.renyi_order is not None:
            return self.renyi_order
        alpha = self.setup.alpha
        if isinstance(alpha, str) or float(alpha) >= 1.0:
            return 0.5
        return float(alpha)

    def regime_warnings(self) -> list:
        out = []
        for n, d, s in self.grid():
            if not n < d:
                out.append(f"cell (n={n}, d={d}, s*={s}) lies outside the s* < n < d regime")
        return out


def committed_rate_constant(setup: ModelSetup) -> Optional[float]:
    return load_constants().get("rate_c", {}).get(setup.constant_key())


def resolve_rate_constant(cfg: RateStudyConfig, notes: Optional[list] = None) -> float:
    if cfg.rate_constant is not None:
        return float(cfg.rate_constant)
    c = committed_rate_constant(cfg.setup)
    if c is None:
        if notes is not None:
            notes.append(f"no committed rate constant for {cfg.setup.constant_key()}; using c = 1")
        return 1.0
    return float(c)


@dataclass(frozen=True)
class ReplicateResult:
    values: dict
    ess_min: float = math.nan
    accept_rate: Optional[float] = None
    error: Optional[str] = None


def study_truth(d: int, s_star: int) -> np.ndarray:
    """First ``s*`` coordinates ``+-1/sqrt(s*)`` (alternating), so ``||theta0||_2 = 1``."""
    return sparse_truth(d, s_star)


def _rate_replicate(task) -> ReplicateResult:
    cfg, cell_index, (n, d, s), rep = task
    rep_seed = replicate_seed(cfg.base_seed, rep)
    setup = cfg.setup
    design = setup.design(d)
    data = generate_dataset(design, n, study_truth(d, s), cfg.sigma0, derive_seed(rep_seed, cell_index, 0))
    try:
        chain = setup.run_chain(data, derive_seed(rep_seed, cell_index, 1))
    except (SamplerError, np.linalg.LinAlgError, ValueError) as exc:
        log.warning("cell (n=%d, d=%d, s*=%d) replicate %d failed: %s", n, d, s, rep, exc)
        return ReplicateResult({}, error=str(exc))
    values = {}
    for label in cfg.metrics:
        est = posterior_functional(
            chain,
            Functional.parse(label),
            data.truth,
            design,
            m=cfg.functional_m,
            seed=derive_seed(rep_seed, cell_index, 2),
            max_draws=cfg.max_draws,
        )
        values[label] = est.mean
    ess = chain_diagnostics(chain).ess_min if len(chain) >= 100 else math.nan
    return ReplicateResult(values, ess, chain.accept_rate)


def _aggregate(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else math.nan
    return float(arr.mean()), se


def run_rate_study(cfg: RateStudyConfig, jobs: int = 1) -> RateReport:
    """Run every (cell, replicate), aggregate, fit slopes and evaluate the checks."""
    report = RateReport(title="rate study")
    for msg in cfg.regime_warnings():
        warnings.warn(msg, stacklevel=2)
        report.notes.append(msg)
    c = resolve_rate_constant(cfg, report.notes)
    report.notes.append(f"rate constant c = {c!r} ({cfg.setup.constant_key()})")
    grid = cfg.grid()
    tasks = [(cfg, ci, cell, rep) for ci, cell in enumerate(grid) for rep in range(cfg.replications)]
    results = parallel_map(_rate_replicate, tasks, jobs)
    for ci, (n, d, s) in enumerate(grid):
        reps = results[ci * cfg.replications : (ci + 1) * cfg.replications]
        failed = [r.error for r in reps if r.error is not None]
        for msg in failed:
            report.failures.append(f"cell (n={n}, d={d}, s*={s}): {msg}")
        rate = cfg.setup.rate(n, d, s, c)
        for label in cfg.metrics:
            vals = tuple(r.values[label] for r in reps if r.error is None)
            mean, se = _aggregate(vals)
            report.cells.append(CellResult(n, d, s, label, mean, se, rate, vals, len(failed)))
    report.checks.append(
        CheckResult("all cells completed", not report.failures, "; ".join(report.failures) or "no sampler failures")
    )
    _fit_slopes(cfg, report)
    if cfg.check_monotone:
        report.checks.extend(monotonicity_checks(cfg, report))
    report.checks.extend(_assertion_checks(cfg, report))
    if renyi_label(cfg.order) in cfg.metrics:
        report.checks.extend(exceedance_checks(cfg, report))
    return report


def _slices(cfg, key):
    out = {}
    for n, d, s in cfg.grid():
        out.setdefault(key(n, d, s), []).append((n, d, s))
    return out


def _fit_slopes(cfg, report):
    for label in cfg.metrics:
        cells = [c for c in report.cells if c.metric == label and np.isfinite(c.mean) and c.mean > 0]
        if len({c.predicted_rate for c in cells}) >= 2 and len(cells) >= 3:
            fit = fit_rate_slope([(c.predicted_rate, c.mean) for c in cells])
            report.slope_fits.append(SlopeRow(label, "predicted_rate", "all", fit))
        for (d, s), members in _slices(cfg, lambda n, d, s: (d, s)).items():
            pts = []
            for n, _, _ in members:
                cell = report.cell(n, d, s, label)
                if np.isfinite(cell.mean) and cell.mean > 0:
                    pts.append((n, cell.mean))
            if len({p[0] for p in pts}) >= 3:
                report.slope_fits.append(SlopeRow(label, "n", f"d={d},s_star={s}", fit_rate_slope(pts)))


def monotonicity_checks(cfg, report) -> list:
    """Averaged risk must not increase in ``n`` by more than 2 standard errors."""
    out = []
    for label in cfg.metrics:
        bad = []
        for (d, s), members in _slices(cfg, lambda n, d, s: (d, s)).items():
            ns = sorted({m[0] for m in members})
            for a, b in zip(ns, ns[1:]):
                ca, cb = report.cell(a, d, s, label), report.cell(b, d, s, label)
                slack = 2.0 * math.sqrt(np.nan_to_num(ca.se) ** 2 + np.nan_to_num(cb.se) ** 2)
                if not cb.mean <= ca.mean + slack:
                    bad.append(f"d={d},s*={s}: n={a}->{b} ({ca.mean:.4g}->{cb.mean:.4g})")
        out.append(CheckResult(f"monotone in n: {label}", not bad, "; ".join(bad) or "nonincreasing up to 2 SE"))
    return out


def _assertion_checks(cfg, report) -> list:
    out = []
    spec = cfg.assertions.get("slope_n")
    if spec:
        lo, hi = spec["range"]
        min_r2 = spec.get("min_r_squared", 0.0)
        rows = [r for r in report.slope_fits if r.metric == spec["metric"] and r.axis == "n"]
        if not rows:
            out.append(CheckResult(f"slope in n: {spec['metric']}", False, "no slice with at least 3 n values"))
        for r in rows:
            ok = lo <= r.fit.slope <= hi and r.fit.r_squared > min_r2
            out.append(
                CheckResult(
                    f"slope in n: {spec['metric']} [{r.slice}]",
                    ok,
                    f"slope={r.fit.slope:.4f} in [{lo}, {hi}], R^2={r.fit.r_squared:.4f} > {min_r2}",
                )
            )
    spec = cfg.assertions.get("s_ratio")
    if spec:
        lo, hi = spec["range"]
        for (n, d), members in _slices(cfg, lambda n, d, s: (n, d)).items():
            ss = sorted({m[2] for m in members})
            for a, b in zip(ss, ss[1:]):
                ratio = report.cell(n, d, b, spec["metric"]).mean / report.cell(n, d, a, spec["metric"]).mean
                out.append(
                    CheckResult(
                        f"risk ratio in s*: {spec['metric']} [n={n},d={d}: s*={a}->{b}]",
                        bool(lo <= ratio <= hi),
                        f"ratio={ratio:.4f} in [{lo}, {hi}]",
                    )
                )
    return out


def exceedance_bound(n: int, eps_n: float, replications: int) -> float:
    """``2/(n eps_n)`` plus three binomial standard errors at that frequency."""
    p0 = 2.0 / (n * eps_n)
    p_se = min(p0, 1.0)
    return p0 + 3.0 * math.sqrt(p_se * (1.0 - p_se) / replications)


def exceedance_checks(cfg, report) -> list:
    """Frequency form of the high-probability concentration statement.

    The fraction of replicates whose posterior-mean Renyi divergence
    exceeds ``2 (order + 1)/(1 - order) * eps_n`` must stay below
    ``2/(n eps_n)`` plus three binomial standard errors.
    """
    out = []
    order = cfg.order
    label = renyi_label(order)
    factor = 2.0 * (order + 1.0) / (1.0 - order)
    for cell in (c for c in report.cells if c.metric == label):
        threshold = factor * cell.predicted_rate
        vals = np.asarray(cell.values)
        freq = float(np.mean(vals > threshold)) if vals.size else math.nan
        bound = exceedance_bound(cell.n, cell.predicted_rate, max(vals.size, 1))
        vacuous = " (bound >= 1, vacuous)" if 2.0 / (cell.n * cell.predicted_rate) >= 1 else ""
        out.append(
            CheckResult(
                f"exceedance frequency [n={cell.n},d={cell.d},s*={cell.s_star}]",
                bool(freq <= bound),
                f"freq={freq:.4f} over threshold {threshold:.4g}; bound={bound:.4f}{vacuous}",
            )
        )
    return out

