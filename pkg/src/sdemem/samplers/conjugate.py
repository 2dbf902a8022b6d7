"""Exact conditional draw of the random-effect hyperparameters.

With phi_ij | mu_j, tau_j ~ N(mu_j, 1/tau_j) and a Normal-Gamma prior,
the full conditional of (mu_j, tau_j) given phi is again Normal-Gamma:

    tau_j | phi ~ Ga(alpha_j + M/2,
                     beta_j + (ss_j + M m0_j (pbar_j - mu0_j)^2 / (M + m0_j)) / 2)
    mu_j | tau_j, phi ~ N((m0_j mu0_j + M pbar_j) / (m0_j + M),
                          1 / ((m0_j + M) tau_j))

where pbar_j is the column mean and ss_j the centered sum of squares.
M = 0 reduces to a prior draw.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

__all__ = ["draw_eta_conjugate", "eta_posterior_params"]


def eta_posterior_params(phi, prior):
    """Posterior Normal-Gamma hyperparameters (mu_n, m_n, alpha_n, beta_n)."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 and phi.size > 0:
        raise ConfigError("phi must be an [M, q] matrix")
    m = phi.shape[0] if phi.size else 0
    if m:
        pbar = phi.mean(axis=0)
        ss = ((phi - pbar) ** 2).sum(axis=0)
    else:
        pbar = np.zeros(prior.q)
        ss = np.zeros(prior.q)
    m0 = prior.m0
    mu_n = (m0 * prior.mu0 + m * pbar) / (m0 + m)
    m_n = m0 + m
    alpha_n = prior.alpha + 0.5 * m
    beta_n = prior.beta + 0.5 * (ss + m * m0 * (pbar - prior.mu0) ** 2 / (m + m0))
    return mu_n, m_n, alpha_n, beta_n


def draw_eta_conjugate(phi, prior, rng):
    """Draw (mu, tau) from their exact full conditional.

    Consumes one gamma vector then one normal vector from rng, in that
    order, so the draw is reproducible from the substream alone.
    """
    mu_n, m_n, alpha_n, beta_n = eta_posterior_params(phi, prior)
    tau = rng.gamma(shape=alpha_n, scale=1.0 / beta_n)
    mu = rng.normal(mu_n, 1.0 / np.sqrt(m_n * tau))
    return mu, tau
