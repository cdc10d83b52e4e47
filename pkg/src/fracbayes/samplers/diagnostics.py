from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import Chain, SamplerError

MIN_DRAWS = 100


@dataclass(frozen=True)
class ChainDiagnostics:
    ess_min: float
    ess_per_param: np.ndarray
    mcse_mean: np.ndarray
    degenerate: np.ndarray

    def to_dict(self) -> dict:
        return {
            "ess_min": _finite_or_none(self.ess_min),
            "ess_per_param": [_finite_or_none(v) for v in self.ess_per_param],
            "mcse_mean": [_finite_or_none(v) for v in self.mcse_mean],
            "degenerate": [bool(v) for v in self.degenerate],
        }


def _finite_or_none(v):
    v = float(v)
    return v if math.isfinite(v) else None


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Sample autocorrelation of a 1-d series via FFT (biased normalization)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    if acov[0] <= 0:
        return np.full(n, np.nan)
    return acov / acov[0]


def effective_sample_size(x) -> float:
    """ESS with Geyer's initial positive sequence truncation.

    Returns ``nan`` for a constant series.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    rho = autocorrelation(x)
    if np.isnan(rho[0]):
        return math.nan
    # sums of adjacent pairs Gamma_k = rho_{2k} + rho_{2k+1}
    m = (n - 1) // 2
    pairs = rho[0 : 2 * m : 2] + rho[1 : 2 * m + 1 : 2]
    neg = np.nonzero(pairs <= 0)[0]
    k = neg[0] if neg.size else pairs.shape[0]
    tau = -1.0 + 2.0 * pairs[:k].sum()
    tau = max(tau, 1.0 / math.log10(max(n, 10)))
    return n / tau


def series_mcse(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        return 0.0
    sd = x.std(ddof=1)
    if sd == 0:
        return 0.0
    if x.shape[0] < MIN_DRAWS:
        return sd / math.sqrt(x.shape[0])
    return sd / math.sqrt(effective_sample_size(x))


def chain_diagnostics(chain: Chain) -> ChainDiagnostics:
    """Per-parameter ESS and MCSE of the posterior mean (``theta_1..theta_d, sigma``).

    Constant coordinates are flagged as degenerate with ``nan`` ESS and
    zero MCSE.
    """
    params = chain.params
    if params.shape[0] < MIN_DRAWS:
        raise SamplerError(f"need at least {MIN_DRAWS} draws for diagnostics, got {params.shape[0]}")
    ess = np.array([effective_sample_size(col) for col in params.T])
    sd = params.std(axis=0, ddof=1)
    degenerate = ~np.isfinite(ess)
    mcse = np.where(degenerate, 0.0, sd / np.sqrt(np.where(degenerate, 1.0, ess)))
    ess_min = float(np.nanmin(ess)) if np.any(~degenerate) else math.nan
    return ChainDiagnostics(ess_min, ess, mcse, degenerate)
