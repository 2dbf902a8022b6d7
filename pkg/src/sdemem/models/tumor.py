"""Two-compartment tumor volume models.

Proliferating and dying cell volumes follow independent geometric Brownian
motions

    dX1 = (beta + gamma^2/2) X1 dt + gamma X1 dW1,
    dX2 = (-delta + psi^2/2) X2 dt + psi X2 dW2,

with total volume V = X1 + X2 observed on the log scale: y = log V + eps,
eps ~ N(0, sigma_e^2). The transition is exactly log-normal:
X1(t+dt) = X1(t) exp(beta dt + gamma sqrt(dt) z). Random effects are
phi_i = log(beta, gamma, delta, psi). The "tumor-ode" variant freezes
gamma = psi = 0, which makes the likelihood a closed-form Gaussian product
around the deterministic growth curve.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .base import KernelInfo, LnaSupport, ModelSpec, PointInit

__all__ = ["gbm_exact_propagate", "odemem_loglik", "make_tumor_model", "make_tumor_ode_model"]

_LOG_2PI = float(np.log(2.0 * np.pi))
_X0_DEFAULT = np.array([75.0, 75.0])


def gbm_exact_propagate(x1, x2, params, dt, gaussians):
    """Exact one-step draw of both compartments.

    params = (beta, gamma, delta, psi) on the natural scale; gaussians has
    two N(0,1) variates per path in its last axis. dt = 0 returns the state
    unchanged.
    """
    beta, gamma, delta, psi = (float(v) for v in params)
    if gamma < 0 or psi < 0:
        raise ValueError("gamma and psi must be nonnegative")
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    z = np.asarray(gaussians, dtype=float)
    if dt == 0.0:
        return x1.copy() if x1.ndim else float(x1), x2.copy() if x2.ndim else float(x2)
    s = np.sqrt(dt)
    out1 = x1 * np.exp(beta * dt + gamma * s * z[..., 0])
    out2 = x2 * np.exp(-delta * dt + psi * s * z[..., 1])
    return (out1 if out1.ndim else float(out1), out2 if out2.ndim else float(out2))


def odemem_loglik(times, ys, beta, delta, sigma_e, x0=_X0_DEFAULT):
    """Exact log-likelihood of the ODE model (gamma = psi = 0).

    The latent curve is deterministic, so y_t are independent Gaussians
    around log(x01 exp(beta t') + x02 exp(-delta t')) with t' measured from
    the first observation time.
    """
    times = np.asarray(times, dtype=float)
    ys = np.asarray(ys, dtype=float).ravel()
    if sigma_e <= 0:
        raise ValueError("sigma_e must be positive")
    t = times - times[0]
    mean = np.log(x0[0] * np.exp(beta * t) + x0[1] * np.exp(-delta * t))
    r = ys - mean
    var = sigma_e * sigma_e
    return float(-0.5 * (r @ r / var + ys.size * (np.log(var) + _LOG_2PI)))


def _obs_logdensity(y, x, xi):
    se = xi[0]
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = x[:, 0] + x[:, 1]
    out = np.full(v.shape, -np.inf)
    ok = v > 0.0
    if np.any(ok):
        r = float(y[0]) - np.log(v[ok])
        out[ok] = -0.5 * (r * r / (se * se) + np.log(se * se) + _LOG_2PI)
    return out


def make_tumor_model(x0=_X0_DEFAULT):
    """Build the SDE tumor ModelSpec with known initial volumes x0."""

    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (2,) or np.any(x0 <= 0):
        raise ConfigError("tumor x0 must be two positive volumes")

    def to_natural(kappa, phi_i):
        return np.exp(np.asarray(phi_i, dtype=float))

    def drift(x, kappa, phi_i):
        beta, gamma, delta, psi = to_natural(kappa, phi_i)
        x = np.asarray(x, dtype=float)
        return np.stack(
            [(beta + 0.5 * gamma * gamma) * x[..., 0],
             (-delta + 0.5 * psi * psi) * x[..., 1]],
            axis=-1,
        )

    def diffusion_diag(x, kappa, phi_i):
        beta, gamma, delta, psi = to_natural(kappa, phi_i)
        x = np.asarray(x, dtype=float)
        return np.stack(
            [gamma * gamma * x[..., 0] ** 2, psi * psi * x[..., 1] ** 2], axis=-1
        )

    def diffusion(x, kappa, phi_i):
        diag = diffusion_diag(x, kappa, phi_i)
        out = np.zeros(diag.shape + (2,))
        out[..., 0, 0] = diag[..., 0]
        out[..., 1, 1] = diag[..., 1]
        return out

    def exact_transition(x, kappa, phi_i, dt, z):
        x = np.asarray(x, dtype=float)
        x1, x2 = gbm_exact_propagate(x[..., 0], x[..., 1], to_natural(kappa, phi_i), dt, z)
        return np.stack([x1, x2], axis=-1)

    def obs_sample(x, xi, rng):
        return np.array([np.log(x[0] + x[1]) + xi[0] * rng.standard_normal()])

    def sim_init(kappa, phi_i, rng):
        return x0.copy()

    # LNA coordinates Z = (log V, log X1, log X2) with weights w_i = X_i / V.
    def lna_alpha(z, nat):
        beta, gamma, delta, psi = nat
        w1 = np.exp(z[1] - z[0])
        w2 = np.exp(z[2] - z[0])
        a_v = (
            w1 * (beta + 0.5 * gamma * gamma)
            + w2 * (-delta + 0.5 * psi * psi)
            - 0.5 * (w1 * w1 * gamma * gamma + w2 * w2 * psi * psi)
        )
        return np.array([a_v, beta, -delta])

    def lna_beta(z, nat):
        beta, gamma, delta, psi = nat
        w1 = np.exp(z[1] - z[0])
        w2 = np.exp(z[2] - z[0])
        g2 = gamma * gamma
        p2 = psi * psi
        return np.array(
            [
                [w1 * w1 * g2 + w2 * w2 * p2, w1 * g2, w2 * p2],
                [w1 * g2, g2, 0.0],
                [w2 * p2, 0.0, p2],
            ]
        )

    def lna_jacobian(z, nat):
        beta, gamma, delta, psi = nat
        w1 = np.exp(z[1] - z[0])
        w2 = np.exp(z[2] - z[0])
        c1 = (beta + 0.5 * gamma * gamma) - w1 * gamma * gamma
        c2 = (-delta + 0.5 * psi * psi) - w2 * psi * psi
        out = np.zeros((3, 3))
        out[0, 0] = -w1 * c1 - w2 * c2
        out[0, 1] = w1 * c1
        out[0, 2] = w2 * c2
        return out

    def lna_init(unit, nat):
        a0 = np.array([np.log(x0[0] + x0[1]), np.log(x0[0]), np.log(x0[1])])
        return a0, np.zeros((3, 3))

    return ModelSpec(
        name="tumor",
        d=2,
        d_o=1,
        q=4,
        drift=drift,
        diffusion=diffusion,
        diffusion_diag=diffusion_diag,
        obs_logdensity=_obs_logdensity,
        obs_sample=obs_sample,
        exact_transition=exact_transition,
        lna_support=LnaSupport(
            dim=3,
            alpha=lna_alpha,
            beta=lna_beta,
            jacobian=lna_jacobian,
            obs_vector=np.array([1.0, 0.0, 0.0]),
            init=lna_init,
        ),
        init_state=PointInit(x0.copy()),
        kernel=KernelInfo(family="gbm", obs="logsum", pack=to_natural),
        phi_names=("log_beta", "log_gamma", "log_delta", "log_psi"),
        xi_names=("sigma_e",),
        to_natural=to_natural,
        sim_init=sim_init,
    )


def make_tumor_ode_model(x0=_X0_DEFAULT):
    """Build the deterministic-growth variant with phi_i = log(beta, delta)."""

    x0 = np.asarray(x0, dtype=float)

    def to_natural(kappa, phi_i):
        return np.exp(np.asarray(phi_i, dtype=float))

    def exact_loglik(unit, phi_i, kappa, xi):
        beta, delta = to_natural(kappa, phi_i)
        return odemem_loglik(unit.times, unit.obs[:, 0], beta, delta, xi[0], x0)

    def obs_sample(x, xi, rng):
        return np.array([np.log(x[0] + x[1]) + xi[0] * rng.standard_normal()])

    def exact_transition(x, kappa, phi_i, dt, z):
        beta, delta = to_natural(kappa, phi_i)
        x = np.asarray(x, dtype=float)
        x1, x2 = gbm_exact_propagate(
            x[..., 0], x[..., 1], (beta, 0.0, delta, 0.0), dt, z
        )
        return np.stack([x1, x2], axis=-1)

    def sim_init(kappa, phi_i, rng):
        return x0.copy()

    return ModelSpec(
        name="tumor-ode",
        d=2,
        d_o=1,
        q=2,
        obs_logdensity=_obs_logdensity,
        obs_sample=obs_sample,
        exact_transition=exact_transition,
        exact_loglik=exact_loglik,
        init_state=PointInit(x0.copy()),
        phi_names=("log_beta", "log_delta"),
        xi_names=("sigma_e",),
        to_natural=to_natural,
        sim_init=sim_init,
    )
