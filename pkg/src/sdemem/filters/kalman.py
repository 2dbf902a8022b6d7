"""Exact likelihood for the OU model with additive Gaussian noise.

The OU transition is linear Gaussian, so the marginal likelihood factorizes
through a scalar Kalman recursion. Used both as a fast exact evaluator in
the Gibbs sampler and as the reference in filter unbiasedness checks.
"""

from __future__ import annotations

import numpy as np

from .backend import default_backend

__all__ = ["kalman_loglik"]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _kalman_py(times, ys, th1, th2, th3, se, m0, p0):
    var_obs = se * se
    infl = th3 * th3 / (2.0 * th1)
    m = m0
    p = p0
    ll = 0.0
    prev_t = times[0]
    for t in range(times.size):
        if t > 0:
            a = np.exp(-th1 * (times[t] - prev_t))
            m = th2 + (m - th2) * a
            p = infl * (1.0 - a * a) + p * a * a
            prev_t = times[t]
        s = p + var_obs
        r = ys[t] - m
        ll += -0.5 * (r * r / s + np.log(s) + _LOG_2PI)
        k = p / s
        m = m + k * r
        p = (1.0 - k) * p
    return ll


def kalman_loglik(times, ys, theta, sigma_eps, x0=None, init_var=0.0):
    """Exact log-likelihood of an OU unit.

    theta = (theta1, theta2, theta3) in the mean-reverting parameterization;
    callers using rate/input form (lambda, nu, sigma) pass theta2 = nu/lambda.
    x0 = None initializes at a point mass on the first observation, matching
    the particle filters' convention.
    """
    times = np.ascontiguousarray(times, dtype=float)
    ys = np.ascontiguousarray(np.asarray(ys, dtype=float).ravel())
    th1, th2, th3 = (float(v) for v in theta)
    se = float(sigma_eps)
    if th1 <= 0.0 or th3 <= 0.0:
        raise ValueError("theta1 and theta3 must be positive")
    if se <= 0.0:
        raise ValueError("sigma_eps must be positive")
    if not np.isfinite(init_var) or init_var < 0.0:
        raise ValueError("init_var must be finite and nonnegative")
    m0 = float(ys[0]) if x0 is None else float(x0)
    # Parameters at the edge of the floating-point domain (overflowed theta,
    # sigma_eps whose square underflows) put the density at an unrepresentable
    # extreme; report zero likelihood instead of propagating NaN.
    infl = th3 * th3 / (2.0 * th1)
    if se * se == 0.0 or not all(
        np.isfinite(v) for v in (th1, th2, th3, infl, m0, se * se)
    ):
        return -np.inf
    engine = default_backend()
    if engine is not None:
        return engine.ou_kalman(times, ys, th1, th2, th3, se, m0, float(init_var))
    return _kalman_py(times, ys, th1, th2, th3, se, m0, float(init_var))
