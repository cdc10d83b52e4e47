"""Fit the universal constants once on calibration grids and freeze them.

The theory proves that constants ``c``, ``K``, ``K_alpha`` and ``K_{v1}``
exist without giving values. Each is fitted here on a designated grid with
calibration seeds (all at or above :data:`CALIBRATION_SEED`), written to
``constants.json`` and then asserted elsewhere on disjoint seeds.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

from .experiments.misspec import ORACLE, RISK, MisspecStudyConfig, run_misspec_study
from .experiments.rates import RateStudyConfig, run_rate_study
from .experiments.setup import renyi_label
from .model import sparse_truth
from .oracle.lemmas import n_dependent_mass_constant, spike_slab_ball_mass, spike_slab_rate_term

log = logging.getLogger(__name__)

CALIBRATION_SEED = 10_000
# headroom applied to Monte-Carlo fitted constants before they are frozen
SAFETY = 1.1

IG_GRID = dict(n=(100, 150, 200), eta=(0.1, 0.2, 0.3), sigma0_sq=(0.5, 1.0, 2.0), a=2.0, t=2.0)
SPIKE_SLAB_GRID = dict(d=(10, 30, 100), s_star=(1, 2, 3), delta=(0.2, 0.4), n=100, mc_samples=200_000)

_STUDY_SAMPLER = {"iterations": 1000, "burn_in": 300, "init": "truth"}
RATE_SETUPS = {
    "gaussian_iso/student": {},
    "gaussian_iso/student/regular": {"alpha": 1.0},
    "gaussian_iso/spike_slab": {"prior": "spike_slab"},
    "unit_sphere/student": {"design_kind": "unit_sphere"},
}
RATE_GRID = dict(n_grid=[100, 200, 400], d_grid=[200], s_grid=[3], sigma0=0.1, replications=5)

MISSPEC_GRID = dict(
    n_grid=[100, 200, 400], d_grid=[50], s_grid=[3], truth_kind="nonlinear", link="sin", sigma0=0.3,
    replications=5, oracle_samples=100_000,
)


def calibrate_ig_n_dependent(grid: dict = IG_GRID) -> float:
    """Largest ``-log mass / (n eta)`` over the grid (deterministic quadrature, no headroom)."""
    worst = 0.0
    for n in grid["n"]:
        alpha = 1.0 - 1.0 / math.log(n) ** grid["t"]
        for eta in grid["eta"]:
            for s0 in grid["sigma0_sq"]:
                worst = max(worst, n_dependent_mass_constant(n, alpha, grid["a"], n**-0.5, s0, eta))
    return worst


def calibrate_spike_slab(v1: float = 1.0, grid: dict = SPIKE_SLAB_GRID, seed: int = CALIBRATION_SEED) -> float:
    """``SAFETY`` times the largest ``-log(mass - 3 SE) / (s log(sqrt(d)/(p delta)))`` over the grid."""
    worst = 0.0
    i = 0
    for d in grid["d"]:
        for s in grid["s_star"]:
            for delta in grid["delta"]:
                prior, est = spike_slab_ball_mass(
                    sparse_truth(d, s), delta, v1, grid["n"], d, seed + i, grid["mc_samples"]
                )
                i += 1
                low = est.estimate - 3.0 * est.std_error
                if not low > 0:
                    raise ArithmeticError(f"ball mass not resolved at d={d}, s*={s}, delta={delta}")
                worst = max(worst, -math.log(low) / spike_slab_rate_term(s, d, prior.p, delta))
    return SAFETY * worst


def _rate_config(setup_overrides: dict, seed: int, grid: dict = RATE_GRID) -> RateStudyConfig:
    setup = {**_STUDY_SAMPLER, **setup_overrides}
    probe = RateStudyConfig.from_dict({**grid, "setup": setup})
    return RateStudyConfig.from_dict(
        {**grid, "setup": setup, "base_seed": seed, "rate_constant": 1.0, "metrics": [renyi_label(probe.order)]}
    )


def calibrate_rate_constant(setup_overrides: dict, seed: int = CALIBRATION_SEED, jobs: int = 1) -> float:
    """Smallest ``c`` with mean Renyi risk ``<= (1 + o)/(1 - o) eps_n(c)`` on every calibration cell."""
    cfg = _rate_config(setup_overrides, seed)
    report = run_rate_study(cfg, jobs)
    if report.failures:
        raise RuntimeError(f"calibration study failed: {report.failures}")
    o = cfg.order
    factor = (1.0 + o) / (1.0 - o)
    return max(c.mean / (factor * c.predicted_rate) for c in report.cells)


def calibrate_misspec(rate_c: float, seed: int = CALIBRATION_SEED, jobs: int = 1, grid: dict = MISSPEC_GRID) -> float:
    """``SAFETY`` times the largest replicate ratio ``risk / (oracle + eps_n)``."""
    cfg = MisspecStudyConfig.from_dict(
        {**grid, "setup": dict(_STUDY_SAMPLER, init="zero"), "base_seed": seed, "rate_constant": rate_c, "k_alpha": 1.0}
    )
    report = run_misspec_study(cfg, jobs)
    if report.failures:
        raise RuntimeError(f"calibration study failed: {report.failures}")
    worst = 0.0
    for cell in (c for c in report.cells if c.metric == RISK):
        oracle = report.cell(cell.n, cell.d, cell.s_star, ORACLE).mean
        worst = max(worst, max(v / (oracle + cell.predicted_rate) for v in cell.values))
    return SAFETY * worst


def calibrate_all(jobs: int = 1) -> dict:
    """Fit every constant; returns the ``constants.json`` document."""
    out = {
        "ig_n_dependent_K": calibrate_ig_n_dependent(),
        "spike_slab_K": {"1": calibrate_spike_slab(1.0)},
        "rate_c": {},
        "misspec_K": {},
    }
    for i, (key, overrides) in enumerate(RATE_SETUPS.items()):
        out["rate_c"][key] = calibrate_rate_constant(overrides, CALIBRATION_SEED + 100 * i, jobs)
        log.info("rate constant %s = %r", key, out["rate_c"][key])
    c = out["rate_c"]["gaussian_iso/student"]
    out["misspec_K"]["gaussian_iso/student/alpha_0.9"] = calibrate_misspec(c, CALIBRATION_SEED + 1000, jobs)
    out["calibration"] = {
        "seeds": f">= {CALIBRATION_SEED}",
        "ig_grid": {k: list(v) if isinstance(v, tuple) else v for k, v in IG_GRID.items()},
        "spike_slab_grid": {k: list(v) if isinstance(v, tuple) else v for k, v in SPIKE_SLAB_GRID.items()},
        "rate_grid": RATE_GRID,
        "misspec_grid": MISSPEC_GRID,
        "sampler": _STUDY_SAMPLER,
        "safety_factor": SAFETY,
    }
    return out


def write_constants(doc: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def default_constants_path() -> Path:
    return Path(__file__).with_name("constants.json")

