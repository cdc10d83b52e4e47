"""Gaussian linear regression with random design.

Observations are i.i.d. pairs ``(y_i, x_i)`` with ``y_i = x_i^T theta + sigma * eps_i``
and ``eps_i ~ N(0, 1)``. Rows ``x_i`` come from a design law that does not
depend on the parameters.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .rng import make_rng

GAUSSIAN_ISO = "gaussian_iso"
UNIT_SPHERE = "unit_sphere"
CUSTOM = "custom"
DESIGN_KINDS = (GAUSSIAN_ISO, UNIT_SPHERE, CUSTOM)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ModelError(ValueError):
    """Raised for invalid model inputs (bad dimensions, bad parameters)."""


@dataclass(frozen=True)
class ParameterPoint:
    """Regression coefficients plus the noise standard deviation."""

    theta: np.ndarray
    sigma: float

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma", float(self.sigma))
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise ModelError(f"sigma must be positive and finite, got {self.sigma}")
        if not np.all(np.isfinite(theta)):
            raise ModelError("theta must be finite in every coordinate")

    @property
    def d(self) -> int:
        return self.theta.shape[0]

    @property
    def sigma_sq(self) -> float:
        return self.sigma**2

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.theta))


@dataclass(frozen=True)
class DesignSpec:
    """Law of a single covariate row.

    ``kind`` is one of ``"gaussian_iso"`` (rows ``N(0, vartheta^2 I_d)``),
    ``"unit_sphere"`` (uniform on the unit sphere of R^d) or ``"custom"``
    (``row_sampler(rng, n) -> (n, d) array``).
    """

    kind: str
    d: int
    vartheta: float = 1.0
    row_sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = field(
        default=None, compare=False, repr=False
    )
    second_moment: Optional[float] = None

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ModelError(f"unknown design kind {self.kind!r}")
        if int(self.d) < 1:
            raise ModelError(f"d must be >= 1, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        if self.kind == GAUSSIAN_ISO and not self.vartheta > 0:
            raise ModelError(f"vartheta must be positive, got {self.vartheta}")
        if self.kind == CUSTOM and self.row_sampler is None:
            raise ModelError("custom design needs a row_sampler")

    @classmethod
    def gaussian_iso(cls, d: int, vartheta: float = 1.0) -> "DesignSpec":
        return cls(GAUSSIAN_ISO, d, vartheta=vartheta)

    @classmethod
    def unit_sphere(cls, d: int) -> "DesignSpec":
        return cls(UNIT_SPHERE, d)

    @property
    def c_x(self) -> float:
        """Constant with ``E||X_1||^2 <= C_x^2``."""
        if self.kind == GAUSSIAN_ISO:
            return self.vartheta * math.sqrt(self.d)
        if self.kind == UNIT_SPHERE:
            return 1.0
        if self.second_moment is None:
            raise ModelError("custom design needs second_moment to define C_x")
        return math.sqrt(self.second_moment)

    @property
    def is_isotropic(self) -> bool:
        return self.kind in (GAUSSIAN_ISO, UNIT_SPHERE)

    def gram(self) -> np.ndarray:
        """``G = E[X X^T]`` for the isotropic designs."""
        if self.kind == GAUSSIAN_ISO:
            return self.vartheta**2 * np.eye(self.d)
        if self.kind == UNIT_SPHERE:
            return np.eye(self.d) / self.d
        raise ModelError("gram matrix is only available in closed form for isotropic designs")

    def projection_second_moment(self, delta: np.ndarray) -> float:
        """Exact ``E[(X_1^T delta)^2]`` for isotropic designs."""
        sq = float(np.dot(delta, delta))
        if self.kind == GAUSSIAN_ISO:
            return self.vartheta**2 * sq
        if self.kind == UNIT_SPHERE:
            return sq / self.d
        raise ModelError("closed-form projection moment needs an isotropic design")

    def sample_rows(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == GAUSSIAN_ISO:
            return self.vartheta * rng.standard_normal((n, self.d))
        if self.kind == UNIT_SPHERE:
            z = rng.standard_normal((n, self.d))
            norms = np.linalg.norm(z, axis=1, keepdims=True)
            # zero rows have probability zero; redraw defensively
            while np.any(norms == 0):
                bad = norms[:, 0] == 0
                z[bad] = rng.standard_normal((int(bad.sum()), self.d))
                norms = np.linalg.norm(z, axis=1, keepdims=True)
            return z / norms
        rows = np.asarray(self.row_sampler(rng, n), dtype=float)
        if rows.shape != (n, self.d):
            raise ModelError(f"custom row sampler returned shape {rows.shape}, expected {(n, self.d)}")
        return rows

    def sample_projections(self, directions: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``m`` copies of ``X_1^T delta`` for each row ``delta`` of ``directions``.

        Returns an array of shape ``(k, m)``. Isotropic designs use the
        rotation-invariant scalar law ``||delta|| * W`` with a common ``W``
        sample, which is identical in distribution to projecting fresh rows.
        """
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        if directions.shape[1] != self.d:
            raise ModelError("direction length does not match design dimension")
        if self.kind == GAUSSIAN_ISO:
            w = self.vartheta * rng.standard_normal(m)
        elif self.kind == UNIT_SPHERE:
            if self.d == 1:
                w = rng.choice(np.array([-1.0, 1.0]), size=m)
            else:
                w = np.sqrt(rng.beta(0.5, 0.5 * (self.d - 1), size=m))
                w *= rng.choice(np.array([-1.0, 1.0]), size=m)
        else:
            rows = self.sample_rows(m, rng)
            return directions @ rows.T
        return np.linalg.norm(directions, axis=1)[:, None] * w[None, :]

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "d": self.d}
        if self.kind == GAUSSIAN_ISO:
            out["vartheta"] = self.vartheta
        if self.second_moment is not None:
            out["second_moment"] = self.second_moment
        return out

    @classmethod
    def from_dict(cls, spec: dict) -> "DesignSpec":
        kind = spec["kind"]
        if kind == GAUSSIAN_ISO:
            return cls.gaussian_iso(spec["d"], spec.get("vartheta", 1.0))
        if kind == UNIT_SPHERE:
            return cls.unit_sphere(spec["d"])
        raise ModelError("custom designs cannot be rebuilt from a dictionary")


@dataclass(frozen=True)
class Dataset:
    """``n`` observations plus provenance."""

    x: np.ndarray
    y: np.ndarray
    design: DesignSpec
    seed: int
    truth: Optional[ParameterPoint] = None

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1, self.design.d)
        y = np.array(self.y, dtype=float).reshape(-1)
        if x.shape[0] != y.shape[0]:
            raise ModelError(f"x has {x.shape[0]} rows but y has length {y.shape[0]}")
        if self.truth is not None and self.truth.d != self.design.d:
            raise ModelError("truth dimension does not match the design")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.design.d

    @property
    def s_star(self) -> Optional[int]:
        return None if self.truth is None else self.truth.sparsity

    def to_csv(self, path) -> Path:
        """Write ``y, x_1..x_d`` rows plus a JSON sidecar (``<path>.json``)."""
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(["y"] + [f"x_{j + 1}" for j in range(self.d)])
            for yi, xi in zip(self.y, self.x):
                writer.writerow([repr(float(yi))] + [repr(float(v)) for v in xi])
        meta = {
            "n": self.n,
            "d": self.d,
            "seed": int(self.seed),
            "design": self.design.to_dict(),
            "truth": None
            if self.truth is None
            else {
                "theta0": [float(v) for v in self.truth.theta],
                "sigma0": self.truth.sigma,
                "s_star": self.s_star,
            },
        }
        sidecar = path.with_suffix(path.suffix + ".json")
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, meta["d"] + 1)
        truth = None
        if meta["truth"] is not None:
            truth = ParameterPoint(np.array(meta["truth"]["theta0"]), meta["truth"]["sigma0"])
        return cls(body[:, 1:], body[:, 0], DesignSpec.from_dict(meta["design"]), meta["seed"], truth)


def generate_design(spec: DesignSpec, n: int, seed) -> np.ndarray:
    """Draw an ``(n, d)`` design matrix with i.i.d. rows from ``spec``."""
    if int(n) < 1:
        raise ModelError(f"n must be >= 1, got {n}")
    return spec.sample_rows(int(n), make_rng(seed, 0))


def generate_dataset(design: DesignSpec, n: int, theta0, sigma0: float, seed) -> Dataset:
    """Simulate ``y = X theta0 + sigma0 * eps`` on a fresh design."""
    theta0 = np.asarray(theta0, dtype=float).reshape(-1)
    if theta0.shape[0] != design.d:
        raise ModelError(f"theta0 has length {theta0.shape[0]}, design has d={design.d}")
    truth = ParameterPoint(theta0, sigma0)
    n = int(n)
    if n < 0:
        raise ModelError(f"n must be >= 0, got {n}")
    if n == 0:
        x = np.zeros((0, design.d))
    else:
        x = generate_design(design, n, seed)
    eps = make_rng(seed, 1).standard_normal(n)
    y = x @ theta0 + truth.sigma * eps
    return Dataset(x, y, design, int(seed), truth)


def residual_sum_squares(data: Dataset, theta) -> float:
    r = data.y - data.x @ np.asarray(theta, dtype=float)
    return float(r @ r)


def log_likelihood(data: Dataset, point: ParameterPoint) -> float:
    """Gaussian log-likelihood of all ``n`` observations."""
    if point.d != data.d:
        raise ModelError("parameter dimension does not match the data")
    rss = residual_sum_squares(data, point.theta)
    return -data.n * (math.log(point.sigma) + LOG_SQRT_2PI) - rss / (2.0 * point.sigma_sq)


def fractional_log_likelihood(data: Dataset, point: ParameterPoint, alpha: float) -> float:
    """``alpha`` times the log-likelihood (tempered likelihood)."""
    check_alpha(alpha)
    return alpha * log_likelihood(data, point)


def check_alpha(alpha: float, allow_one: bool = True) -> float:
    alpha = float(alpha)
    upper_ok = alpha <= 1.0 if allow_one else alpha < 1.0
    if not (alpha > 0.0 and upper_ok):
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise ModelError(f"alpha must lie in {bound}, got {alpha}")
    return alpha


def sparse_truth(d: int, s_star: int) -> np.ndarray:
    """First ``s_star`` coordinates equal to ``+-1/sqrt(s_star)`` (alternating), rest zero."""
    theta0 = np.zeros(d)
    if s_star > 0:
        signs = np.where(np.arange(s_star) % 2 == 0, 1.0, -1.0)
        theta0[:s_star] = signs / math.sqrt(s_star)
    return theta0
