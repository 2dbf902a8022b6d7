"""Likelihood evaluators: particle filters, exact Kalman, and the LNA."""

from .backend import have_compiled, resolve_backend
from .kalman import kalman_loglik
from .lna import lna_forward_filter, lna_ode_step
from .particle import (
    FilterResult,
    ParticleSystem,
    bootstrap_filter,
    bridge_filter,
    sort_particles,
)

__all__ = [
    "FilterResult",
    "ParticleSystem",
    "bootstrap_filter",
    "bridge_filter",
    "sort_particles",
    "kalman_loglik",
    "lna_forward_filter",
    "lna_ode_step",
    "have_compiled",
    "resolve_backend",
]
