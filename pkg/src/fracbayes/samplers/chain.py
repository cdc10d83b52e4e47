from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..model import ParameterPoint, check_alpha


class SamplerError(RuntimeError):
    """Sampler failure (non-finite linear algebra, bad configuration)."""


INIT_ZERO = "zero"
INIT_TRUTH = "truth"


@dataclass(frozen=True)
class SamplerConfig:
    alpha: float = 0.9
    iterations: int = 10_000
    burn_in: int = 2_500
    thin: int = 1
    init: Union[str, ParameterPoint] = INIT_ZERO
    seed: int = 0
    step_size: Optional[float] = None
    truncation: str = "reject"
    coordinate_moves: bool = True

    def __post_init__(self):
        check_alpha(self.alpha)
        if self.iterations < 1:
            raise SamplerError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise SamplerError(f"need 0 <= burn_in < iterations, got {self.burn_in} / {self.iterations}")
        if self.thin < 1:
            raise SamplerError("thin must be >= 1")
        if not (isinstance(self.init, ParameterPoint) or self.init in (INIT_ZERO, INIT_TRUTH)):
            raise SamplerError(f"unknown init {self.init!r}")
        if self.step_size is not None and not self.step_size > 0:
            raise SamplerError("step_size must be positive")
        if self.truncation not in ("reject", "coordinate"):
            raise SamplerError(f"unknown truncation handling {self.truncation!r}")

    @property
    def kept(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))


@dataclass
class Chain:
    """Post burn-in, thinned draws.

    ``theta`` has shape ``(draws, d)``; ``sigma`` has shape ``(draws,)``.
    ``aux`` holds the scale-mixture variances (Student Gibbs) or the slab
    indicators (spike-and-slab Gibbs), one row per kept draw.
    """

    theta: np.ndarray
    sigma: np.ndarray
    config: SamplerConfig
    aux: Optional[np.ndarray] = None
    accept_rate: Optional[float] = None
    rejections: int = 0
    proposals: int = 0
    flags: list = field(default_factory=list)

    def __len__(self):
        return self.sigma.shape[0]

    def __getitem__(self, i) -> ParameterPoint:
        return ParameterPoint(self.theta[i], self.sigma[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def d(self) -> int:
        return self.theta.shape[1]

    @property
    def params(self) -> np.ndarray:
        """Draws stacked as ``(draws, d + 1)``: ``theta_1..theta_d, sigma``."""
        return np.column_stack([self.theta, self.sigma])

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.proposals if self.proposals else 0.0

    def posterior_mean(self) -> np.ndarray:
        return self.params.mean(axis=0)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow([f"theta_{j + 1}" for j in range(self.d)] + ["sigma"])
            for row in self.params:
                writer.writerow([repr(float(v)) for v in row])
        return path


def single_draw_chain(point: ParameterPoint, config: Optional[SamplerConfig] = None) -> Chain:
    return stack_draws([point], config)


def stack_draws(points, config: Optional[SamplerConfig] = None) -> Chain:
    points = list(points)
    theta = np.array([p.theta for p in points], dtype=float)
    sigma = np.array([p.sigma for p in points], dtype=float)
    return Chain(theta, sigma, config or SamplerConfig(iterations=len(points) + 1, burn_in=0))


def alpha_log_schedule(n: int, t: float = 2.0) -> float:
    """``alpha = 1 - 1/(log n)^t``, a named alpha policy (requires n >= 3, t > 1)."""
    if n < 3 or t <= 1:
        raise SamplerError("log schedule needs n >= 3 and t > 1")
    return 1.0 - 1.0 / math.log(n) ** t
