"""Tensor-grid posterior for ``d <= 2``.

The unnormalized tempered posterior is evaluated on a uniform grid in each
coefficient and in ``log sigma`` and normalized by a Riemann sum. A coarse
pilot grid locates the posterior; the final grid spans
``mean +- half_width * sd`` per axis and is widened until the mass in the
outermost slices is negligible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from ..model import LOG_SQRT_2PI, Dataset, check_alpha
from ..priors import InvGammaPrior, ScaledStudentPrior, SpikeSlabPrior

EDGE_MASS_LIMIT = 1e-6


class GridError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    theta_points: int = 161
    log_sigma_points: int = 121
    half_width: float = 8.0
    pilot_points: int = 81
    max_widenings: int = 6
    theta_bounds: Optional[Sequence[tuple]] = None
    log_sigma_bounds: Optional[tuple] = None


@dataclass
class GridPosterior:
    theta_grid: list
    sigma_grid: np.ndarray
    log_weights: np.ndarray
    edge_mass: float = field(default=0.0)

    @property
    def d(self) -> int:
        return len(self.theta_grid)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def mesh(self):
        """Broadcastable coordinate arrays ``(theta_1, ..., theta_d, sigma)``."""
        shape = self.log_weights.ndim
        out = []
        for k, g in enumerate([*self.theta_grid, self.sigma_grid]):
            s = [1] * shape
            s[k] = g.shape[0]
            out.append(g.reshape(s))
        return out

    def expect(self, func: Callable) -> float:
        """``E[func(theta_1, ..., theta_d, sigma)]`` under the grid weights."""
        values = np.broadcast_to(func(*self.mesh()), self.log_weights.shape)
        return float(np.sum(self.weights * values))

    def mean(self) -> np.ndarray:
        """Posterior means of ``theta_1..theta_d, sigma``."""
        mesh = self.mesh()
        return np.array([self.expect(lambda *m, k=k: m[k]) for k in range(len(mesh))])

    def second_moments(self) -> np.ndarray:
        """``E[theta_k^2]`` for each coefficient, then ``E[sigma^2]``."""
        mesh = self.mesh()
        return np.array([self.expect(lambda *m, k=k: m[k] ** 2) for k in range(len(mesh))])

    def sd(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.second_moments() - self.mean() ** 2, 0.0))


def _log_coefficient_prior(prior, mesh_theta):
    if isinstance(prior, ScaledStudentPrior):
        out = sum(-2.0 * np.log(prior.tau**2 + t**2) for t in mesh_theta)
        l1 = sum(np.abs(t) for t in mesh_theta)
        return np.where(l1 <= prior.c1, out, -np.inf)
    if isinstance(prior, SpikeSlabPrior):
        out = 0.0
        for t in mesh_theta:
            slab = -0.5 * math.log(2 * math.pi * prior.v1) - 0.5 * t**2 / prior.v1
            spike = -0.5 * math.log(2 * math.pi * prior.v0) - 0.5 * t**2 / prior.v0
            with np.errstate(divide="ignore"):
                out = out + np.logaddexp(np.log(prior.p) + slab, np.log1p(-prior.p) + spike)
        return out
    # generic prior with a log_density method
    flat = np.stack(np.broadcast_arrays(*mesh_theta), axis=-1)
    return np.apply_along_axis(prior.log_density, -1, flat)


def _log_density_tensor(data, prior, ig, alpha, theta_grid, log_sigma_grid):
    d = len(theta_grid)
    shape = [g.shape[0] for g in theta_grid]
    mesh_theta = np.meshgrid(*theta_grid, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh_theta], axis=1)
    # RSS(theta) = y'y - 2 theta' X'y + theta' X'X theta
    xtx = data.x.T @ data.x
    xty = data.x.T @ data.y
    rss = float(data.y @ data.y) - 2.0 * pts @ xty + np.einsum("ij,jk,ik->i", pts, xtx, pts)
    rss = np.maximum(rss, 0.0).reshape(shape)
    log_prior = _log_coefficient_prior(prior, mesh_theta)
    s = log_sigma_grid.reshape([1] * d + [-1])
    sig_sq = np.exp(2.0 * s)
    loglik = -data.n * (s + LOG_SQRT_2PI) - rss[..., None] / (2.0 * sig_sq)
    a, b = ig.shape, ig.rate
    # IG density of sigma^2 plus log |d sigma^2 / d log sigma| = log 2 + 2 s
    log_ig = a * math.log(b) - float(gammaln(a)) - (a + 1.0) * 2.0 * s - b / sig_sq + math.log(2.0) + 2.0 * s
    return alpha * loglik + log_prior[..., None] + log_ig


def _normalize(logd, theta_grid, log_sigma_grid):
    cell = np.prod([g[1] - g[0] for g in theta_grid]) * (log_sigma_grid[1] - log_sigma_grid[0])
    total = logsumexp(logd)
    if not np.isfinite(total):
        raise GridError("posterior has no mass on the grid")
    return logd - total, total + math.log(cell)


def _edge_mass(log_w):
    w = np.exp(log_w)
    mass = 0.0
    for ax in range(w.ndim):
        mass += np.take(w, 0, axis=ax).sum() + np.take(w, -1, axis=ax).sum()
    return float(mass)


def _marginal_moments(log_w, grids):
    w = np.exp(log_w)
    out = []
    for ax, g in enumerate(grids):
        other = tuple(i for i in range(w.ndim) if i != ax)
        marg = w.sum(axis=other)
        mu = float(marg @ g)
        sd = math.sqrt(max(float(marg @ (g - mu) ** 2), 0.0))
        out.append((mu, sd))
    return out


def _pilot_box(data, ig, alpha):
    d = data.d
    sy = float(np.std(data.y)) if data.n >= 2 else math.sqrt(ig.rate / max(ig.shape - 1.0, 0.5))
    sy = max(sy, 1e-3)
    prec = alpha * data.x.T @ data.x / sy**2 + np.eye(d)
    cov = np.linalg.inv(prec)
    center = cov @ (alpha * data.x.T @ data.y / sy**2)
    se = np.sqrt(np.diag(cov))
    theta_box = [(min(0.0, c) - 12 * s, max(0.0, c) + 12 * s) for c, s in zip(center, se)]
    ls = math.log(sy)
    return theta_box, (ls - 6.0, ls + 4.0)


def grid_posterior(
    data: Dataset, prior, ig: InvGammaPrior, alpha: float, grid_spec: Optional[GridSpec] = None
) -> GridPosterior:
    """Brute-force normalized posterior on a ``(theta, log sigma)`` tensor grid."""
    check_alpha(alpha)
    spec = grid_spec or GridSpec()
    if data.d > 2:
        raise GridError(f"grid posterior supports d <= 2, got d={data.d}")
    if spec.theta_bounds is not None and spec.log_sigma_bounds is not None:
        theta_box, sigma_box = list(spec.theta_bounds), spec.log_sigma_bounds
    else:
        theta_box, sigma_box = _pilot_box(data, ig, alpha)
        for _ in range(3):
            grids = [np.linspace(lo, hi, spec.pilot_points) for lo, hi in theta_box]
            sgrid = np.linspace(*sigma_box, spec.pilot_points)
            log_w, _ = _normalize(_log_density_tensor(data, prior, ig, alpha, grids, sgrid), grids, sgrid)
            moments = _marginal_moments(log_w, [*grids, sgrid])
            boxes = [(mu - spec.half_width * sd, mu + spec.half_width * sd) for mu, sd in moments]
            # keep the pilot box if the pilot cannot resolve the spread
            new_theta = [
                (max(lo, blo), min(hi, bhi)) if sd > 0 else (lo, hi)
                for (lo, hi), (blo, bhi), (_, sd) in zip(theta_box, boxes[:-1], moments[:-1])
            ]
            if _edge_mass(log_w) > EDGE_MASS_LIMIT:
                theta_box = [(lo - (hi - lo), hi + (hi - lo)) for lo, hi in theta_box]
                sigma_box = (sigma_box[0] - 2.0, sigma_box[1] + 2.0)
                continue
            theta_box, sigma_box = new_theta, boxes[-1]
            break
    for _ in range(spec.max_widenings + 1):
        grids = [np.linspace(lo, hi, spec.theta_points) for lo, hi in theta_box]
        sgrid = np.linspace(*sigma_box, spec.log_sigma_points)
        log_w, _ = _normalize(_log_density_tensor(data, prior, ig, alpha, grids, sgrid), grids, sgrid)
        edge = _edge_mass(log_w)
        if edge <= EDGE_MASS_LIMIT:
            return GridPosterior(grids, np.exp(sgrid), log_w, edge)
        theta_box = [(lo - 0.25 * (hi - lo), hi + 0.25 * (hi - lo)) for lo, hi in theta_box]
        sigma_box = (sigma_box[0] - 0.25 * (sigma_box[1] - sigma_box[0]), sigma_box[1] + 0.25 * (sigma_box[1] - sigma_box[0]))
    raise GridError(f"grid edge mass {edge:.3g} exceeds {EDGE_MASS_LIMIT:g}; coverage insufficient")
