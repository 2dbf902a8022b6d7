"""Particle filters driven by fixed auxiliary-variable streams.

Both filters are pure functions of (data, parameters, stream): they draw
nothing themselves, so a fixed stream gives a bit-reproducible likelihood
estimate and a Crank-Nicolson update of the stream gives a correlated one.
Resampling is systematic at every observation, with an optional pre-sort of
the particle cloud that keeps the stream-to-particle assignment stable
enough for correlation to survive into the likelihood estimate.

Models with a compiled kernel are dispatched to the Cython engine when it
is available; everything else runs through the general NumPy path below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..aux_random import gaussian_to_uniform, systematic_resample
from ..errors import ConfigError, NumericalModelError, UnsupportedModelError
from ..models.base import GaussianInit, PointInit
from .backend import resolve_backend

__all__ = [
    "FilterResult",
    "ParticleSystem",
    "bootstrap_filter",
    "bridge_filter",
    "sort_particles",
]

_LOG_2PI = float(np.log(2.0 * np.pi))

# Engine dispatch codes, mirrored by the constants exported from _engine_cy.
TRANS_OU_EXACT = 0
TRANS_OU_EM = 1
TRANS_GBM_EXACT = 2
TRANS_GBM_EM = 3
OBS_IDENTITY = 0
OBS_LOGSUM = 1
INIT_POINT = 0
INIT_GAUSS = 1

_TRANS_CODE = {
    ("ou", "exact"): TRANS_OU_EXACT,
    ("ou", "em"): TRANS_OU_EM,
    ("gbm", "exact"): TRANS_GBM_EXACT,
    ("gbm", "em"): TRANS_GBM_EM,
}
_OBS_CODE = {"identity": OBS_IDENTITY, "logsum": OBS_LOGSUM}


@dataclass(frozen=True)
class FilterResult:
    """Outcome of one filter pass.

    loglik is -inf with degenerate=True when every particle weight vanished
    at some observation; particles holds the final-time cloud.
    """

    loglik: float
    n_resamples: int
    degenerate: bool
    particles: Optional[np.ndarray] = None


@dataclass
class ParticleSystem:
    """Particle cloud with log weights and their normalized counterparts."""

    particles: np.ndarray  # [N, d]
    log_weights: np.ndarray  # [N]
    weights: np.ndarray  # [N], normalized


def sort_particles(particles):
    """Stable ordering permutation of a particle cloud.

    Scalar states sort by value; multivariate states sort by squared
    Euclidean distance from the cloud mean. Returns indices, not particles.
    """
    x = np.asarray(particles, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1:
        raise ConfigError("particles must be a nonempty [N, d] array")
    if x.shape[1] == 1:
        key = x[:, 0]
    else:
        dev = x - x.mean(axis=0)
        key = np.einsum("ij,ij->i", dev, dev)
    return np.argsort(key, kind="stable")


def _resolve_init(unit, model):
    init = model.init_state
    if isinstance(init, PointInit):
        if init.value is None:
            if model.d != model.d_o:
                raise ConfigError(
                    f"model {model.name}: first-observation init needs d == d_o"
                )
            return INIT_POINT, unit.obs[0].astype(float), np.zeros(model.d)
        return INIT_POINT, np.asarray(init.value, dtype=float), np.zeros(model.d)
    if isinstance(init, GaussianInit):
        return (
            INIT_GAUSS,
            np.asarray(init.mean, dtype=float),
            np.asarray(init.sd, dtype=float),
        )
    raise ConfigError(f"model {model.name}: unsupported init_state {init!r}")


def _check_stream(unit, model, n_particles, u, transition, n_substeps):
    if u.spec.n_obs != unit.n_obs:
        raise ConfigError(
            f"stream sized for {u.spec.n_obs} observations, unit has {unit.n_obs}"
        )
    if u.spec.n_particles != int(n_particles):
        raise ConfigError(
            f"stream sized for {u.spec.n_particles} particles, requested {n_particles}"
        )
    if u.spec.dim != model.d:
        raise ConfigError(f"stream dimension {u.spec.dim} != model dimension {model.d}")
    if transition not in ("exact", "em"):
        raise ConfigError(f"transition must be 'exact' or 'em', got {transition!r}")
    if transition == "exact" and model.exact_transition is None:
        raise UnsupportedModelError(f"model {model.name} has no exact transition")
    if transition == "em":
        if model.drift is None:
            raise UnsupportedModelError(f"model {model.name} has no drift for EM")
        if n_substeps < 1 or n_substeps > u.spec.n_substeps:
            raise ConfigError(
                f"n_substeps {n_substeps} outside the stream allocation "
                f"(1..{u.spec.n_substeps})"
            )


def _normalize(logw):
    if np.isnan(logw).any():
        raise NumericalModelError("observation density returned NaN")
    m = logw.max()
    if not np.isfinite(m):
        return -np.inf, None
    w = np.exp(logw - m)
    s = w.sum()
    return float(m + np.log(s) - np.log(logw.size)), w / s


def _init_particles(unit, model, u):
    kind, a, b = _resolve_init(unit, model)
    n = u.spec.n_particles
    if kind == INIT_POINT:
        return np.tile(a, (n, 1))
    return a[None, :] + b[None, :] * u.init_block


def _kernel_eligible(model, transition):
    return (
        model.kernel is not None
        and (model.kernel.family, transition) in _TRANS_CODE
        and model.d_o == 1
    )


def bootstrap_filter(
    unit,
    model,
    kappa,
    phi_i,
    xi,
    n_particles,
    u,
    sort=False,
    transition="exact",
    n_substeps=1,
    backend=None,
):
    """Bootstrap particle filter: propagate from the transition, weight by
    the observation density, resample systematically at every observation.

    The likelihood estimate is the product over times of the mean unnormalized
    weight and is unbiased for the true likelihood. All randomness comes from
    the stream u.
    """
    _check_stream(unit, model, n_particles, u, transition, n_substeps)
    xi = np.asarray(xi, dtype=float).ravel()
    engine = resolve_backend(backend)
    if engine is not None and _kernel_eligible(model, transition):
        kind, a, b = _resolve_init(unit, model)
        ll, n_res, degen, cloud = engine.bootstrap(
            np.ascontiguousarray(unit.obs[:, 0]),
            _gaps(unit.times),
            _TRANS_CODE[(model.kernel.family, transition)],
            np.ascontiguousarray(model.kernel.pack(kappa, phi_i), dtype=float),
            _OBS_CODE[model.kernel.obs],
            float(xi[0]),
            int(kind),
            np.ascontiguousarray(a),
            np.ascontiguousarray(b),
            u.prop_block,
            gaussian_to_uniform(u.resample_block),
            u.init_block,
            int(n_substeps),
            bool(sort),
        )
        return FilterResult(ll, n_res, degen, cloud)
    return _bootstrap_general(unit, model, kappa, phi_i, xi, u, sort, transition, n_substeps)


def _gaps(times):
    out = np.empty(times.size)
    out[0] = 0.0
    out[1:] = np.diff(times)
    return out


def _bootstrap_general(unit, model, kappa, phi_i, xi, u, sort, transition, n_substeps):
    y = unit.obs
    times = unit.times
    x = _init_particles(unit, model, u)
    logw = np.asarray(model.obs_logdensity(y[0], x, xi), dtype=float)
    loglik, w = _normalize(logw)
    if w is None:
        return FilterResult(-np.inf, 0, True, x)
    uniforms = gaussian_to_uniform(u.resample_block)
    n_res = 0
    for t in range(1, times.size):
        if sort:
            order = sort_particles(x)
            x = x[order]
            w = w[order]
        anc = systematic_resample(w, uniforms[t])
        n_res += 1
        x = x[anc]
        z = u.prop_block[t]
        dt = times[t] - times[t - 1]
        if transition == "exact":
            x = model.exact_transition(x, kappa, phi_i, dt, z[0])
        else:
            x = model.em_propagate(x, kappa, phi_i, dt, n_substeps, z[:n_substeps])
        logw = np.asarray(model.obs_logdensity(y[t], x, xi), dtype=float)
        step, w = _normalize(logw)
        if w is None:
            return FilterResult(-np.inf, n_res, True, x)
        loglik += step
    return FilterResult(loglik, n_res, False, x)


def bridge_filter(
    unit,
    model,
    kappa,
    phi_i,
    xi,
    n_particles,
    u,
    sort=False,
    backend=None,
):
    """Guided filter for scalar Gaussian-transition models observed directly.

    Particles are proposed from the one-step transition conditioned on the
    next observation, N(mu, Sigma) with mu = a0 + b0 (b0 + se^2)^{-1} (y - a0)
    and Sigma = b0 (1 - (b0 + se^2)^{-1} b0), where (a0, b0) are the
    transition moments; weights carry the proposal correction. At se = 0 the
    proposal collapses onto the observation and the weight reduces to
    N(y; a0, b0). In the diffuse-noise limit the weights recover the
    bootstrap filter's.
    """
    if model.bridge_support is None or model.d != 1 or not model.obs_gaussian_identity:
        raise UnsupportedModelError(f"model {model.name} does not support the bridge filter")
    _check_stream(unit, model, n_particles, u, "exact", 1)
    xi = np.asarray(xi, dtype=float).ravel()
    se = float(xi[0])
    if se < 0.0:
        raise ConfigError("sigma_eps must be nonnegative")
    engine = resolve_backend(backend)
    if engine is not None and model.kernel is not None and model.kernel.family == "ou":
        kind, a, b = _resolve_init(unit, model)
        ll, n_res, degen, cloud = engine.bridge(
            np.ascontiguousarray(unit.obs[:, 0]),
            _gaps(unit.times),
            np.ascontiguousarray(model.kernel.pack(kappa, phi_i), dtype=float),
            se,
            int(kind),
            np.ascontiguousarray(a),
            np.ascontiguousarray(b),
            u.prop_block,
            gaussian_to_uniform(u.resample_block),
            u.init_block,
            bool(sort),
        )
        return FilterResult(ll, n_res, degen, cloud)
    return _bridge_general(unit, model, kappa, phi_i, xi, u, sort)


def _norm_logpdf(r, var):
    return -0.5 * (r * r / var + np.log(var) + _LOG_2PI)


def _bridge_general(unit, model, kappa, phi_i, xi, u, sort):
    y = unit.obs[:, 0]
    times = unit.times
    se2 = float(xi[0]) ** 2
    x = _init_particles(unit, model, u)
    logw = np.asarray(model.obs_logdensity(unit.obs[0], x, xi), dtype=float)
    loglik, w = _normalize(logw)
    if w is None:
        return FilterResult(-np.inf, 0, True, x)
    uniforms = gaussian_to_uniform(u.resample_block)
    n_res = 0
    for t in range(1, times.size):
        if sort:
            order = sort_particles(x)
            x = x[order]
            w = w[order]
        anc = systematic_resample(w, uniforms[t])
        n_res += 1
        x = x[anc]
        dt = times[t] - times[t - 1]
        a0, b0 = model.bridge_support.cond_moments(x[:, 0], kappa, phi_i, dt)
        b0 = float(b0)
        if b0 <= 0.0:
            raise NumericalModelError("bridge proposal needs positive transition variance")
        z = u.prop_block[t, 0, :, 0]
        if se2 == 0.0:
            xn = np.full(a0.shape, y[t])
            logw = _norm_logpdf(y[t] - a0, b0)
        else:
            denom = b0 + se2
            mu = a0 + (b0 / denom) * (y[t] - a0)
            sig = b0 * (1.0 - b0 / denom)
            xn = mu + np.sqrt(sig) * z
            logw = (
                _norm_logpdf(y[t] - xn, se2)
                + _norm_logpdf(xn - a0, b0)
                - _norm_logpdf(xn - mu, sig)
            )
        x = xn[:, None]
        step, w = _normalize(logw)
        if w is None:
            return FilterResult(-np.inf, n_res, True, x)
        loglik += step
    return FilterResult(loglik, n_res, False, x)
