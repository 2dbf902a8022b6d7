"""Chain diagnostics: effective sample size, distance between chains,
and the efficiency summaries used to compare sampler settings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import UndefinedStatisticError

__all__ = [
    "autocorrelation_time",
    "ess",
    "mess",
    "wasserstein1d",
    "perf_measure",
    "EfficiencyReport",
    "efficiency_table",
]

W1_GRID = 1024


def _autocovariance(x):
    # FFT autocovariance with the biased 1/n normalisation.
    n = x.size
    xd = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xd, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    return acov / n


def autocorrelation_time(x):
    """Integrated autocorrelation time by Geyer's initial-sequence rule.

    Lag pairs (2m, 2m+1) are summed, truncated at the first non-positive
    pair, and forced non-increasing; the result is at least 1.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a 1-D draw sequence")
    if x.size < 10:
        raise UndefinedStatisticError("need at least 10 draws")
    # ptp, not variance: a constant chain can carry mean round-off
    if np.ptp(x) == 0.0:
        raise UndefinedStatisticError("draws have zero variance")
    acov = _autocovariance(x)
    if acov[0] <= 0.0 or not np.isfinite(acov[0]):
        raise UndefinedStatisticError("draws have zero or undefined variance")
    rho = acov / acov[0]
    n_pairs = x.size // 2
    pair = rho[0 : 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    total = 0.0
    ceiling = np.inf
    for g in pair:
        if g <= 0.0:
            break
        g = min(g, ceiling)
        ceiling = g
        total += g
    return max(1.0, 2.0 * total - 1.0)


def ess(x):
    """Effective sample size n / tau, clamped to [1, n]."""
    x = np.asarray(x, dtype=float)
    return float(min(x.size, max(1.0, x.size / autocorrelation_time(x))))


def mess(draws, columns=None):
    """Minimum ESS across columns of a 2-D draw matrix."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    idx = range(draws.shape[1]) if columns is None else columns
    values = [ess(draws[:, j]) for j in idx]
    if not values:
        raise UndefinedStatisticError("no columns to summarise")
    return float(min(values))


def wasserstein1d(a, b):
    """First Wasserstein distance between two empirical distributions.

    Equal-length samples use the exact sorted-coupling form; otherwise both
    quantile functions are read on a common grid of 1024 levels.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise UndefinedStatisticError("empty sample")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    levels = (np.arange(W1_GRID) + 0.5) / W1_GRID
    qa = np.quantile(a, levels, method="inverted_cdf")
    qb = np.quantile(b, levels, method="inverted_cdf")
    return float(np.mean(np.abs(qa - qb)))


def perf_measure(w1, runtime_seconds):
    """Accuracy-times-cost score; smaller is better."""
    return float(w1) * float(runtime_seconds)


@dataclass
class EfficiencyReport:
    """One row of an algorithm comparison table."""

    algorithm: str
    rho: float
    n_particles: int
    cpu_minutes: float
    min_ess: float
    ess_per_minute: float
    relative: Optional[float] = None

    @classmethod
    def from_chain(cls, output, algorithm=None, columns=None):
        # The minimum runs over every scalar chain, unit effects included.
        post = output.post
        names = list(output.columns)
        if columns is None:
            keep = list(range(len(names)))
        else:
            keep = [names.index(c) for c in columns]
        m = mess(post, keep)
        minutes = output.runtime_seconds / 60.0
        per_min = m / minutes if minutes > 0 else np.inf
        label = algorithm
        if label is None:
            label = output.scheme if output.rho == 0.0 else f"{output.scheme} cpm"
        counts = set(output.n_particles)
        n = output.n_particles[0] if len(counts) == 1 else max(counts)
        return cls(
            algorithm=label,
            rho=output.rho,
            n_particles=int(n),
            cpu_minutes=minutes,
            min_ess=m,
            ess_per_minute=per_min,
        )


def efficiency_table(reports, baseline=0):
    """Fill the relative column against one baseline row and return rows."""
    base = reports[baseline].ess_per_minute
    out = []
    for r in reports:
        rel = r.ess_per_minute / base if base > 0 else np.inf
        out.append(
            EfficiencyReport(
                r.algorithm, r.rho, r.n_particles, r.cpu_minutes, r.min_ess,
                r.ess_per_minute, rel,
            )
        )
    return out
