"""Mean-reverting Ornstein-Uhlenbeck models.

dX_t = theta1 (theta2 - X_t) dt + theta3 dW_t, observed as y = x + eps with
eps ~ N(0, sigma_eps^2). Two parameterizations of the same process are
registered: "ou" with phi_i = log(theta1, theta2, theta3), and "neuronal-ou"
with phi_i = log(lambda, nu, sigma) where the drift is -lambda x + nu, i.e.
theta = (lambda, nu / lambda, sigma).
"""

from __future__ import annotations

import numpy as np

from ..filters.kalman import kalman_loglik
from .base import (
    BridgeSupport,
    KernelInfo,
    LnaSupport,
    ModelSpec,
    PointInit,
)

__all__ = ["ou_exact_propagate", "ou_transition_moments", "make_ou_model"]

_LOG_2PI = float(np.log(2.0 * np.pi))


def ou_transition_moments(x, theta, dt):
    """Conditional mean and variance of X_{t+dt} given X_t = x.

    mean = theta2 + (x - theta2) exp(-theta1 dt),
    var = theta3^2 (1 - exp(-2 theta1 dt)) / (2 theta1).
    """
    th1, th2, th3 = (float(v) for v in theta)
    if th1 <= 0.0 or th3 <= 0.0:
        raise ValueError("theta1 and theta3 must be positive")
    if dt < 0.0:
        raise ValueError("dt must be nonnegative")
    a = np.exp(-th1 * dt)
    var = th3 * th3 * (1.0 - np.exp(-2.0 * th1 * dt)) / (2.0 * th1)
    return th2 + (np.asarray(x, dtype=float) - th2) * a, float(var)


def ou_exact_propagate(x, theta, dt, gaussian):
    """Sample X_{t+dt} | X_t = x exactly using one N(0,1) variate per path.

    dt = 0 returns x unchanged for any gaussian.
    """
    x = np.asarray(x, dtype=float)
    if dt == 0.0:
        return x.copy() if x.ndim else float(x)
    mean, var = ou_transition_moments(x, theta, dt)
    out = mean + np.sqrt(var) * np.asarray(gaussian, dtype=float)
    return out if out.ndim else float(out)


def _norm_logpdf(y, mean, var):
    return -0.5 * ((y - mean) ** 2 / var + np.log(var) + _LOG_2PI)


def make_ou_model(name="ou", neuronal=False):
    """Build the ModelSpec for either OU parameterization."""

    if neuronal:
        def to_theta(kappa, phi_i):
            lam, nu, sig = np.exp(np.asarray(phi_i, dtype=float))
            return np.array([lam, nu / lam, sig])

        phi_names = ("log_lambda", "log_nu", "log_sigma")
    else:
        def to_theta(kappa, phi_i):
            return np.exp(np.asarray(phi_i, dtype=float))

        phi_names = ("log_theta1", "log_theta2", "log_theta3")

    def drift(x, kappa, phi_i):
        th1, th2, _ = to_theta(kappa, phi_i)
        return th1 * (th2 - x)

    def diffusion_diag(x, kappa, phi_i):
        th3 = to_theta(kappa, phi_i)[2]
        return np.full_like(np.asarray(x, dtype=float), th3 * th3)

    def diffusion(x, kappa, phi_i):
        return diffusion_diag(x, kappa, phi_i)[..., None]

    def exact_transition(x, kappa, phi_i, dt, z):
        return ou_exact_propagate(x, to_theta(kappa, phi_i), dt, z)

    def obs_logdensity(y, x, xi):
        se = xi[0]
        return _norm_logpdf(float(y[0]), np.asarray(x)[..., 0], se * se)

    def obs_sample(x, xi, rng):
        return np.array([x[0] + xi[0] * rng.standard_normal()])

    def cond_moments(x, kappa, phi_i, dt):
        return ou_transition_moments(x, to_theta(kappa, phi_i), dt)

    def exact_loglik(unit, phi_i, kappa, xi):
        return kalman_loglik(unit.times, unit.obs[:, 0], to_theta(kappa, phi_i), xi[0])

    def lna_alpha(z, theta):
        return theta[0] * (theta[1] - z)

    def lna_beta(z, theta):
        return np.array([[theta[2] ** 2]])

    def lna_jacobian(z, theta):
        return np.array([[-theta[0]]])

    def lna_init(unit, theta):
        return np.array([unit.obs[0, 0]]), np.zeros((1, 1))

    def sim_init(kappa, phi_i, rng):
        th1, th2, th3 = to_theta(kappa, phi_i)
        return np.array([th2 + np.sqrt(th3 * th3 / (2.0 * th1)) * rng.standard_normal()])

    spec = ModelSpec(
        name=name,
        d=1,
        d_o=1,
        q=3,
        drift=drift,
        diffusion=diffusion,
        diffusion_diag=diffusion_diag,
        obs_logdensity=obs_logdensity,
        obs_sample=obs_sample,
        exact_transition=exact_transition,
        bridge_support=BridgeSupport(cond_moments=cond_moments),
        lna_support=LnaSupport(
            dim=1,
            alpha=lna_alpha,
            beta=lna_beta,
            jacobian=lna_jacobian,
            obs_vector=np.array([1.0]),
            init=lna_init,
        ),
        exact_loglik=exact_loglik,
        init_state=PointInit(None),
        kernel=KernelInfo(family="ou", obs="identity", pack=to_theta),
        phi_names=phi_names,
        to_natural=to_theta,
        sim_init=sim_init,
        obs_gaussian_identity=True,
    )
    return spec
