"""Linear noise approximation: ODE moments plus a Gaussian forward filter.

Between observations the state law is approximated as Gaussian with mean m
and covariance H evolving by

    dm/dt = alpha(m),   dH/dt = H J(m)^T + beta(m) + J(m) H,

integrated jointly with classic fixed-step RK4. Observations are linear in
the LNA coordinates, y = P^T z + eps, so filtering is a scalar Kalman
update. For linear models (OU) the approximation is exact and the filter
log-likelihood matches the Kalman one.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericalModelError

__all__ = ["lna_ode_step", "lna_forward_filter"]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _rates(support, nat, m, h):
    a = np.asarray(support.alpha(m, nat), dtype=float)
    j = np.asarray(support.jacobian(m, nat), dtype=float)
    dh = h @ j.T + np.asarray(support.beta(m, nat), dtype=float) + j @ h
    return a, dh


def lna_ode_step(m, h, support, nat_params, t0, t1, n_substeps=16):
    """Integrate the joint (m, H) system from t0 to t1; returns (m, H).

    H is symmetrized after every substep to stop round-off drift.
    """
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if n_substeps < 1:
        raise ValueError("n_substeps must be >= 1")
    m = np.asarray(m, dtype=float).copy()
    h = np.asarray(h, dtype=float).copy()
    dt = (t1 - t0) / n_substeps
    if dt == 0.0:
        return m, h
    # Overflow here means the caller is probing an absurd parameter point;
    # the filter's domain check turns the resulting nonfinite moments into
    # NumericalModelError, so the warnings are pure noise.
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n_substeps):
            k1m, k1h = _rates(support, nat_params, m, h)
            k2m, k2h = _rates(support, nat_params, m + 0.5 * dt * k1m, h + 0.5 * dt * k1h)
            k3m, k3h = _rates(support, nat_params, m + 0.5 * dt * k2m, h + 0.5 * dt * k2h)
            k4m, k4h = _rates(support, nat_params, m + dt * k3m, h + dt * k3h)
            m = m + dt / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
            h = h + dt / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
            h = 0.5 * (h + h.T)
    return m, h


def lna_forward_filter(unit, support, nat_params, sigma_eps, n_substeps=16):
    """Gaussian forward filter in the model's LNA coordinates.

    Each observation contributes N(y; P^T m, P^T H P + sigma_eps^2) to the
    log-likelihood, followed by the conjugate posterior update of (m, H).
    """
    se2 = float(sigma_eps) ** 2
    if se2 <= 0.0:
        raise ValueError("sigma_eps must be positive")
    p = np.asarray(support.obs_vector, dtype=float)
    a, c = support.init(unit, nat_params)
    a = np.asarray(a, dtype=float).copy()
    c = np.asarray(c, dtype=float).copy()
    y = unit.obs[:, 0]
    times = unit.times
    ll = 0.0
    for t in range(times.size):
        if t > 0:
            a, c = lna_ode_step(a, c, support, nat_params, times[t - 1], times[t], n_substeps)
        cp = c @ p
        s = float(p @ cp) + se2
        r = y[t] - float(p @ a)
        if not np.isfinite(s) or s <= 0.0 or np.isnan(r):
            raise NumericalModelError("LNA moments left the numerical domain")
        ll += -0.5 * (r * r / s + np.log(s) + _LOG_2PI)
        k = cp / s
        a = a + k * r
        c = c - np.outer(k, cp)
        c = 0.5 * (c + c.T)
    return float(ll)
