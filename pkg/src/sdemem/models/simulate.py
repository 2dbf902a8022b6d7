"""Synthetic data generation for any registered model."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .base import Dataset, GaussianInit, ParameterState, PointInit, UnitData, sample_random_effects

__all__ = ["simulate_dataset"]


def _resolve_sim_init(model, kappa, phi_i, rng):
    if model.sim_init is not None:
        return np.asarray(model.sim_init(kappa, phi_i, rng), dtype=float)
    init = model.init_state
    if isinstance(init, PointInit):
        if init.value is None:
            raise ConfigError(
                f"model {model.name} initializes at the first observation; "
                "it needs sim_init to generate data"
            )
        return np.asarray(init.value, dtype=float)
    if isinstance(init, GaussianInit):
        return np.asarray(init.mean) + np.asarray(init.sd) * rng.standard_normal(model.d)
    raise ConfigError(f"model {model.name} has no usable initial state")


def simulate_dataset(
    model,
    eta=None,
    phi=None,
    kappa=(),
    xi=(0.3,),
    n_units=1,
    n_obs=100,
    dt=0.1,
    rng=None,
    t0=0.0,
    em_substeps=20,
):
    """Simulate a dataset and return it with the generating parameter state.

    Exactly one of eta = (mu, tau) or an explicit phi matrix [M, q] must be
    given; with eta the random effects are drawn first. Latent paths use the
    model's exact transition when available, otherwise Euler-Maruyama with
    ``em_substeps`` substeps per observation gap. n_obs may be per-unit.

    Observation times are t0 + dt * (0 .. n-1); the first observation is
    taken at the initial state.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if (eta is None) == (phi is None):
        raise ConfigError("provide exactly one of eta or phi")
    kappa = np.asarray(kappa, dtype=float).ravel()
    xi = np.asarray(xi, dtype=float).ravel()
    if n_units < 1:
        raise ConfigError("n_units must be >= 1")

    if eta is not None:
        mu, tau = (np.asarray(a, dtype=float).ravel() for a in eta)
        phi = sample_random_effects((mu, tau), n_units, rng)
    else:
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        if phi.shape[0] != n_units:
            raise ConfigError("phi must have one row per unit")
        mu = phi.mean(axis=0)
        spread = phi.var(axis=0, ddof=0)
        tau = 1.0 / np.maximum(spread, 1e-12)
    if phi.shape[1] != model.q:
        raise ConfigError(f"phi must have {model.q} columns for model {model.name}")

    counts = np.broadcast_to(np.asarray(n_obs, dtype=int), (n_units,))
    if np.any(counts < 1):
        raise ConfigError("n_obs must be >= 1")

    units = []
    for i in range(n_units):
        n = int(counts[i])
        times = t0 + dt * np.arange(n)
        x = _resolve_sim_init(model, kappa, phi[i], rng)
        ys = np.empty((n, model.d_o))
        ys[0] = model.obs_sample(x, xi, rng)
        for t in range(1, n):
            gap = times[t] - times[t - 1]
            if model.exact_transition is not None:
                z = rng.standard_normal(model.d)
                x = model.exact_transition(x, kappa, phi[i], gap, z)
            else:
                z = rng.standard_normal((em_substeps, model.d))
                x = model.em_propagate(x, kappa, phi[i], gap, em_substeps, z)
            ys[t] = model.obs_sample(x, xi, rng)
        units.append(UnitData(unit_id=i + 1, times=times, obs=ys))

    truth = ParameterState(phi=phi, kappa=kappa, xi=xi, mu=mu, tau=tau)
    return Dataset(units=units), truth
