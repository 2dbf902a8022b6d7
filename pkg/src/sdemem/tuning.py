"""Particle-count tuning for the pseudo-marginal kernels.

The mixing of a pseudo-marginal chain is governed by the variance of each
unit's log-likelihood estimator at a representative parameter value. With
independent streams the usual guideline is a variance near 2; with
correlated streams the budget grows to 2.16^2 / (1 - rho_l^2), where
rho_l is the correlation between successive estimates induced by the
stream move. tune_particles searches, unit by unit, for the smallest
particle count that meets the applicable budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import aux_random
from .aux_random import crank_nicolson, init_stream, substream
from .errors import ConfigError, TuningFailureError, UndefinedStatisticError
from .models.base import Dataset, ParameterState
from .samplers.gibbs import UnitEvaluator

__all__ = [
    "VarianceEstimate",
    "CorrelationEstimate",
    "TuningReport",
    "estimate_loglik_variance",
    "estimate_loglik_correlation",
    "tune_particles",
    "variance_target",
]

PMMH_VARIANCE_TARGET = 2.0
CPMMH_VARIANCE_SCALE = 2.16**2
MAX_PARTICLES = 2**16


@dataclass
class VarianceEstimate:
    """Replicated total log-likelihood estimates at one particle count."""

    mean: float
    variance: float
    n_replicates: int
    n_degenerate: int

    @property
    def degenerate(self):
        return self.n_degenerate > 0


@dataclass
class CorrelationEstimate:
    """Correlation of paired estimates across one stream move."""

    correlation: float
    n_pairs: int


@dataclass
class TuningReport:
    """Chosen count plus the search trajectory, for one unit or overall."""

    n_particles: int
    variance: float
    target: float
    rho: float
    rho_l: Optional[float]
    kind: str
    n_replicates: int
    seed: int
    unit_id: Optional[int] = None
    trajectory: list = field(default_factory=list)
    units: list = field(default_factory=list)


def _make_evaluators(dataset, model, kind, n_particles, sort, transition,
                     n_substeps, backend):
    return [
        UnitEvaluator(u, model, kind, n_particles, sort, transition,
                      n_substeps, 8, backend)
        for u in dataset.units
    ]


def _draw_streams(evaluators, seed, replicate, purpose):
    return [
        init_stream(ev.stream_spec, substream(seed, replicate, i, purpose))
        if ev.uses_u
        else None
        for i, ev in enumerate(evaluators)
    ]


def _total_loglik(evaluators, state, us):
    total = 0.0
    for i, ev in enumerate(evaluators):
        ll = ev.loglik(state.phi[i], state.kappa, state.xi, us[i])
        if ll == -np.inf:
            return -np.inf
        total += ll
    return total


def estimate_loglik_variance(dataset, model, state, n_particles, n_replicates=50,
                             seed=0, kind="bootstrap", sort=False,
                             transition="exact", n_substeps=1, backend=None):
    """Sample variance of the total log-likelihood estimate.

    Replicate r drives every unit with an independent stream keyed by
    (seed, r, unit). A degenerate replicate (all-zero weights somewhere)
    makes the variance +inf; the mean then summarises the finite
    replicates only. Pass a single-unit dataset for the per-unit variance
    the tuning rules are stated in.
    """
    if n_replicates < 2:
        raise ConfigError("need at least 2 replicates for a variance")
    evaluators = _make_evaluators(dataset, model, kind, n_particles, sort,
                                  transition, n_substeps, backend)
    values = np.empty(n_replicates)
    for r in range(n_replicates):
        us = _draw_streams(evaluators, seed, r, aux_random.PURPOSE_TUNE)
        values[r] = _total_loglik(evaluators, state, us)
    finite = values[np.isfinite(values)]
    n_bad = int(n_replicates - finite.size)
    if n_bad:
        mean = float(finite.mean()) if finite.size else -np.inf
        return VarianceEstimate(mean, np.inf, n_replicates, n_bad)
    return VarianceEstimate(
        float(values.mean()), float(values.var(ddof=1)), n_replicates, 0
    )


def estimate_loglik_correlation(dataset, model, state, n_particles, rho,
                                n_replicates=50, seed=0, kind="bootstrap",
                                sort=None, transition="exact", n_substeps=1,
                                backend=None):
    """Correlation between estimates one stream move apart.

    Pair r is (loglik(u_r), loglik(u_r')) with u_r' the correlated move of
    u_r at the given rho. Sorting defaults to on when rho > 0, matching
    how the sampler would run.
    """
    if rho == 1.0:
        return CorrelationEstimate(1.0, n_replicates)
    if n_replicates < 3:
        raise ConfigError("need at least 3 replicate pairs for a correlation")
    if sort is None:
        sort = rho > 0.0
    evaluators = _make_evaluators(dataset, model, kind, n_particles, sort,
                                  transition, n_substeps, backend)
    if not any(ev.uses_u for ev in evaluators):
        raise UndefinedStatisticError(
            "estimate correlation is undefined for deterministic evaluators"
        )
    first = np.empty(n_replicates)
    second = np.empty(n_replicates)
    for r in range(n_replicates):
        us = _draw_streams(evaluators, seed, r, aux_random.PURPOSE_TUNE)
        moved = [
            crank_nicolson(
                us[i], rho, substream(seed, r, i, aux_random.PURPOSE_TUNE_CN)
            )
            if us[i] is not None
            else None
            for i in range(len(evaluators))
        ]
        first[r] = _total_loglik(evaluators, state, us)
        second[r] = _total_loglik(evaluators, state, moved)
    keep = np.isfinite(first) & np.isfinite(second)
    if keep.sum() < 3:
        raise UndefinedStatisticError(
            "too few finite estimate pairs to correlate; increase n_particles"
        )
    a, b = first[keep], second[keep]
    # ptp, not var: np.var of a constant array carries summation round-off
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        raise UndefinedStatisticError("estimate pairs have zero variance")
    return CorrelationEstimate(float(np.corrcoef(a, b)[0, 1]), int(keep.sum()))


def variance_target(rho, rho_l=None):
    """Variance budget: 2 for independent streams, inflated under correlation."""
    if rho == 0.0:
        return PMMH_VARIANCE_TARGET
    if rho_l is None:
        raise ConfigError("correlated tuning needs an estimate correlation rho_l")
    if not -1.0 < rho_l < 1.0:
        raise UndefinedStatisticError(f"estimate correlation {rho_l} out of range")
    return CPMMH_VARIANCE_SCALE / (1.0 - rho_l**2)


def _unit_state(state, i):
    return ParameterState(
        phi=state.phi[i : i + 1], kappa=state.kappa, xi=state.xi,
        mu=state.mu, tau=state.tau,
    )


def _tune_unit(unit_data, model, unit_state, rho, pilot, n_replicates, seed,
               kind, sort, transition, n_substeps, backend, max_particles):
    trajectory = []

    deterministic = kind in ("kalman", "exact", "lna")

    def measure(n):
        est = estimate_loglik_variance(
            unit_data, model, unit_state, n, n_replicates, seed, kind, sort,
            transition, n_substeps, backend,
        )
        rho_l = None
        if rho > 0.0 and not deterministic and not est.degenerate:
            rho_l = estimate_loglik_correlation(
                unit_data, model, unit_state, n, rho, n_replicates, seed,
                kind, sort, transition, n_substeps, backend,
            ).correlation
        if rho == 0.0 or deterministic:
            target = PMMH_VARIANCE_TARGET
        elif est.degenerate:
            target = np.nan  # budget unknowable until the estimate is finite
        else:
            target = variance_target(rho, rho_l)
        ok = bool(est.variance <= target) if np.isfinite(target) else False
        trajectory.append(
            {
                "unit_id": unit_data.units[0].unit_id,
                "n_particles": n,
                "variance": est.variance,
                "rho_l": rho_l,
                "target": target,
                "meets_target": ok,
                "n_degenerate": est.n_degenerate,
            }
        )
        return ok

    n = int(pilot)
    while not measure(n):
        n *= 2
        if n > max_particles:
            raise TuningFailureError(
                f"unit {unit_data.units[0].unit_id}: no particle count up to "
                f"{max_particles} meets the variance budget",
                detail={"trajectory": trajectory},
            )

    step = max(1, n // 8)
    best = trajectory[-1]
    while n - step >= 1:
        if not measure(n - step):
            break
        n -= step
        best = trajectory[-1]

    return TuningReport(
        n_particles=best["n_particles"],
        variance=best["variance"],
        target=best["target"],
        rho=rho,
        rho_l=best["rho_l"],
        kind=kind,
        n_replicates=n_replicates,
        seed=seed,
        unit_id=best["unit_id"],
        trajectory=trajectory,
    )


def tune_particles(dataset, model, state, rho=0.0, pilot=10, n_replicates=50,
                   seed=0, kind="bootstrap", sort=None, transition="exact",
                   n_substeps=1, backend=None, max_particles=MAX_PARTICLES):
    """Find the smallest per-unit particle counts meeting the variance budget.

    Each unit is tuned separately: the count doubles from the pilot until
    the budget holds (re-derived at every count when rho > 0, since the
    estimate correlation moves with N), then walks back down in steps of
    max(1, N/8) while the budget still holds. The overall recommendation
    is the largest per-unit choice; per-unit reports sit in .units.
    Raises TuningFailureError if any unit hits the cap.
    """
    if pilot < 1:
        raise ConfigError("pilot particle count must be >= 1")
    if sort is None:
        sort = rho > 0.0
    reports = []
    for i, unit in enumerate(dataset.units):
        reports.append(
            _tune_unit(
                Dataset(units=[unit]), model, _unit_state(state, i), rho,
                pilot, n_replicates, seed, kind, sort, transition, n_substeps,
                backend, max_particles,
            )
        )
    worst = max(reports, key=lambda r: r.n_particles)
    return TuningReport(
        n_particles=worst.n_particles,
        variance=worst.variance,
        target=worst.target,
        rho=rho,
        rho_l=worst.rho_l,
        kind=kind,
        n_replicates=n_replicates,
        seed=seed,
        unit_id=None,
        trajectory=[row for r in reports for row in r.trajectory],
        units=reports,
    )
