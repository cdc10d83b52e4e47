"""Shared model/sampler configuration for the simulation studies."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Optional, Union

from ..model import GAUSSIAN_ISO, UNIT_SPHERE, DesignSpec, check_alpha
from ..priors import (
    DEFAULT_C1,
    ScaledStudentPrior,
    default_inv_gamma,
    default_spike_slab_prior,
    default_student_prior,
)
from ..samplers import SamplerConfig, alpha_log_schedule, run_gibbs, run_mala

STUDENT = "student"
SPIKE_SLAB = "spike_slab"
PRIOR_KINDS = (STUDENT, SPIKE_SLAB)
GIBBS = "gibbs"
MALA = "mala"
ALPHA_LOG_SCHEDULE = "log_schedule"


class StudyConfigError(ValueError):
    """Invalid study configuration."""


@dataclass(frozen=True)
class ModelSetup:
    """Design law, priors, tempering and sampler settings for every cell of a study.

    ``alpha`` is a number in ``(0, 1]`` or ``"log_schedule"`` for
    ``alpha = 1 - 1/(log n)^alpha_t``. Prior hyperparameters left as ``None``
    take their n- and d-dependent defaults.
    """

    design_kind: str = GAUSSIAN_ISO
    vartheta: float = 1.0
    prior: str = STUDENT
    tau: Optional[float] = None
    c1: float = DEFAULT_C1
    p: Optional[float] = None
    v0: Optional[float] = None
    v1: float = 1.0
    ig_a: float = 2.0
    ig_b: Optional[float] = None
    sampler: str = GIBBS
    alpha: Union[float, str] = 0.9
    alpha_t: float = 2.0
    iterations: int = 2000
    burn_in: int = 500
    thin: int = 1
    init: str = "zero"
    step_size: Optional[float] = None
    truncation: str = "reject"
    coordinate_moves: bool = True

    def __post_init__(self):
        if self.design_kind not in (GAUSSIAN_ISO, UNIT_SPHERE):
            raise StudyConfigError(f"studies support gaussian_iso and unit_sphere designs, got {self.design_kind!r}")
        if self.prior not in PRIOR_KINDS:
            raise StudyConfigError(f"unknown prior {self.prior!r}")
        if self.sampler not in (GIBBS, MALA):
            raise StudyConfigError(f"unknown sampler {self.sampler!r}")
        if self.sampler == MALA and self.step_size is None:
            raise StudyConfigError("the MALA sampler needs step_size")
        if isinstance(self.alpha, str):
            if self.alpha != ALPHA_LOG_SCHEDULE:
                raise StudyConfigError(f"alpha must be a number or {ALPHA_LOG_SCHEDULE!r}")
        else:
            try:
                check_alpha(self.alpha)
            except ValueError as exc:
                raise StudyConfigError(str(exc)) from exc
        # validates iterations/burn-in/thin/init early
        self.sampler_config(100, 0)

    @classmethod
    def from_dict(cls, spec: Optional[dict]) -> "ModelSetup":
        spec = dict(spec or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(spec) - known)
        if unknown:
            raise StudyConfigError(f"unknown setup keys: {unknown}")
        return cls(**spec)

    def to_dict(self) -> dict:
        return asdict(self)

    def design(self, d: int) -> DesignSpec:
        if self.design_kind == GAUSSIAN_ISO:
            return DesignSpec.gaussian_iso(d, self.vartheta)
        return DesignSpec.unit_sphere(d)

    def alpha_for(self, n: int) -> float:
        if self.alpha == ALPHA_LOG_SCHEDULE:
            return alpha_log_schedule(n, self.alpha_t)
        return float(self.alpha)

    @property
    def is_regular(self) -> bool:
        return not isinstance(self.alpha, str) and float(self.alpha) == 1.0

    def coefficient_prior(self, n: int, d: int):
        if self.prior == STUDENT:
            return default_student_prior(self.design(d), n, tau=self.tau, c1=self.c1)
        return default_spike_slab_prior(n, d, p=self.p, v0=self.v0, v1=self.v1)

    def variance_prior(self, n: int):
        return default_inv_gamma(n, a=self.ig_a, b=self.ig_b)

    def sampler_config(self, n: int, seed: int) -> SamplerConfig:
        try:
            return SamplerConfig(
                alpha=self.alpha_for(max(n, 3)),
                iterations=self.iterations,
                burn_in=self.burn_in,
                thin=self.thin,
                init=self.init,
                seed=seed,
                step_size=self.step_size,
                truncation=self.truncation,
                coordinate_moves=self.coordinate_moves,
            )
        except Exception as exc:
            raise StudyConfigError(f"invalid sampler settings: {exc}") from exc

    def run_chain(self, data, seed: int):
        n, d = data.n, data.d
        prior = self.coefficient_prior(n, d)
        ig = self.variance_prior(n)
        cfg = self.sampler_config(n, seed)
        if self.sampler == MALA:
            return run_mala(data, prior, ig, cfg)
        return run_gibbs(data, prior, ig, cfg, store_aux=False)

    def constant_key(self) -> str:
        key = f"{self.design_kind}/{self.prior}"
        return key + "/regular" if self.is_regular else key

    def rate(self, n: int, d: int, s_star: int, c: float = 1.0) -> float:
        """``epsilon_n`` for this setup; the spike-and-slab rate carries no ``C_1`` factor."""
        c1 = self.c1 if self.prior == STUDENT else 1.0
        return predicted_rate(n, d, s_star, self.design(d).c_x, c1, c)


def predicted_rate(n: int, d: int, s_star: int, c_x: float, c1: float, c: float = 1.0) -> float:
    """``epsilon_n = c s log(C_x C_1 sqrt(n d) / s) / n`` with ``s = max(s_star, 1)``."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    s = max(int(s_star), 1)
    return c * s * math.log(c_x * c1 * math.sqrt(n * d) / s) / n


def parallel_map(fn, tasks, jobs: int = 1):
    """Ordered map, optionally over a process pool; results never depend on ``jobs``."""
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def renyi_label(order: float) -> str:
    return f"joint_divergence:renyi_{order:g}"
