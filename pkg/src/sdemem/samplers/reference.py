"""Plainly coded PMMH sampler kept as a cross-check.

This runs the same blocked update sequence as run_gibbs with rho = 0 but
is written as one flat loop with no likelihood caching: every acceptance
ratio recomputes its denominator by rerunning the filter at the current
state and stored stream. It shares only the contract-level primitives
(model, filters, substreams, adapters, conjugate draw), so any
bookkeeping mistake in the main sampler shows up as a draw-for-draw
mismatch against this one.
"""

from __future__ import annotations

import time

import numpy as np

from .. import aux_random
from ..aux_random import init_stream, substream
from ..errors import ConfigError, StartupDegeneracyError
from .adapt import ProposalAdapter, adapt_proposal
from .conjugate import draw_eta_conjugate
from .gibbs import ChainOutput, UnitEvaluator, chain_columns

__all__ = ["run_pmmh_reference"]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _phi_logprior(phi_i, mu, tau):
    lognorm = 0.5 * float(np.sum(np.log(tau))) - 0.5 * mu.size * _LOG_2PI
    r = phi_i - mu
    return lognorm - 0.5 * float(np.sum(tau * r * r))


def run_pmmh_reference(dataset, model, priors, config):
    """Run the reference PMMH chain and return a ChainOutput.

    Requires rho = 0; every proposal draws a fresh stream from the same
    substream the main sampler uses for its stream move, so a correctly
    implemented run_gibbs at rho = 0 reproduces this chain exactly.
    """
    if config.rho != 0.0:
        raise ConfigError("the PMMH reference has no stream correlation; set rho = 0")

    m = dataset.n_units
    kinds = (
        [config.filter_kind] * m
        if isinstance(config.filter_kind, str)
        else list(config.filter_kind)
    )
    counts = (
        [config.n_particles] * m
        if isinstance(config.n_particles, (int, np.integer))
        else list(config.n_particles)
    )
    evaluators = [
        UnitEvaluator(
            dataset.units[i], model, kinds[i], counts[i], config.sort_flag,
            config.transition, config.n_substeps, config.lna_substeps,
            config.backend,
        )
        for i in range(m)
    ]

    mu, tau = priors.eta.mean()
    phi = np.tile(mu, (m, 1)) if config.init_phi is None else np.array(
        config.init_phi, dtype=float
    )
    kappa = (
        np.array([p.initial_natural() for p in priors.kappa])
        if config.init_kappa is None
        else np.asarray(config.init_kappa, dtype=float)
    )
    xi = (
        np.array([p.initial_natural() for p in priors.xi])
        if config.init_xi is None
        else np.asarray(config.init_xi, dtype=float)
    )

    seed = int(config.seed)
    us = []
    for i, ev in enumerate(evaluators):
        u = (
            init_stream(ev.stream_spec, substream(seed, 0, i, aux_random.PURPOSE_INIT_U))
            if ev.uses_u
            else None
        )
        if ev.loglik(phi[i], kappa, xi, u) == -np.inf:
            raise StartupDegeneracyError(
                f"unit {dataset.units[i].unit_id}: zero likelihood estimate at the "
                "initial state; adjust initial parameters or particle count",
                unit_id=dataset.units[i].unit_id,
            )
        us.append(u)

    ad = config.adapt
    unit_adapters = [
        ProposalAdapter.fresh(model.q, ad.init_sd, ad.target, ad.decay) for _ in range(m)
    ]
    zeta = np.array(
        [p.from_natural(v) for p, v in zip(priors.kappa, kappa)]
        + [p.from_natural(v) for p, v in zip(priors.xi, xi)]
    )
    if config.joint_common:
        blocks = [(np.arange(zeta.size), list(priors.kappa) + list(priors.xi))]
    else:
        blocks = []
        if model.p:
            blocks.append((np.arange(model.p), list(priors.kappa)))
        blocks.append((np.arange(model.p, zeta.size), list(priors.xi)))
    common_adapters = [
        ProposalAdapter.fresh(len(idx), ad.init_sd, ad.target, ad.decay)
        for idx, _ in blocks
    ]

    def unpack(full):
        k = np.array(
            [p.to_natural(z) for p, z in zip(priors.kappa, full[: model.p])]
        )
        x = np.array([p.to_natural(z) for p, z in zip(priors.xi, full[model.p :])])
        return k, x

    columns = chain_columns(model, m)
    draws = np.empty((config.n_iters, len(columns)))
    loglik_trace = np.empty(config.n_iters)
    unit_accepts = np.zeros(m)
    common_accepts = np.zeros(len(blocks))
    started = time.perf_counter()

    for j in range(1, config.n_iters + 1):
        adapting = ad.enabled and not (ad.freeze_after_burn_in and j > config.burn_in)
        for i, ev in enumerate(evaluators):
            rng_prop = substream(seed, j, i, aux_random.PURPOSE_PROPOSE)
            rng_u = substream(seed, j, i, aux_random.PURPOSE_CN)
            rng_acc = substream(seed, j, i, aux_random.PURPOSE_ACCEPT)
            phi_star = unit_adapters[i].propose(phi[i], rng_prop)
            u_star = init_stream(ev.stream_spec, rng_u) if ev.uses_u else None
            num = _phi_logprior(phi_star, mu, tau) + ev.loglik(phi_star, kappa, xi, u_star)
            den = _phi_logprior(phi[i], mu, tau) + ev.loglik(phi[i], kappa, xi, us[i])
            accept = (
                num > -np.inf and np.log(rng_acc.random()) < min(0.0, num - den)
            )
            if accept:
                phi[i] = phi_star
                us[i] = u_star
                unit_accepts[i] += 1
            if adapting:
                adapt_proposal(unit_adapters[i], accept, phi[i], j)

        for b, (idx, block_priors) in enumerate(blocks):
            sentinel = m + b
            rng_prop = substream(seed, j, sentinel, aux_random.PURPOSE_PROPOSE)
            rng_acc = substream(seed, j, sentinel, aux_random.PURPOSE_ACCEPT)
            sub_star = common_adapters[b].propose(zeta[idx], rng_prop)
            zeta_star = zeta.copy()
            zeta_star[idx] = sub_star
            kappa_star, xi_star = unpack(zeta_star)
            lp_star = float(
                sum(
                    p.log_density_unconstrained(z)
                    for p, z in zip(block_priors, sub_star)
                )
            )
            lp_cur = float(
                sum(
                    p.log_density_unconstrained(z)
                    for p, z in zip(block_priors, zeta[idx])
                )
            )
            ll_star = [
                ev.loglik(phi[i], kappa_star, xi_star, us[i])
                for i, ev in enumerate(evaluators)
            ]
            ll_cur = [
                ev.loglik(phi[i], kappa, xi, us[i]) for i, ev in enumerate(evaluators)
            ]
            num = lp_star + sum(ll_star)
            den = lp_cur + sum(ll_cur)
            accept = num > -np.inf and np.log(rng_acc.random()) < min(0.0, num - den)
            if accept:
                zeta = zeta_star
                kappa, xi = kappa_star, xi_star
                common_accepts[b] += 1
            if adapting:
                adapt_proposal(common_adapters[b], accept, zeta[idx], j)

        mu, tau = draw_eta_conjugate(
            phi, priors.eta, substream(seed, j, m, aux_random.PURPOSE_ETA)
        )

        draws[j - 1] = np.concatenate([phi.ravel(), kappa, xi, mu, tau])
        loglik_trace[j - 1] = sum(
            ev.loglik(phi[i], kappa, xi, us[i]) for i, ev in enumerate(evaluators)
        )

    return ChainOutput(
        columns=columns,
        draws=draws,
        burn_in=config.burn_in,
        seed=seed,
        scheme="pmmh-reference",
        rho=0.0,
        n_particles=[ev.n_particles for ev in evaluators],
        filter_kinds=kinds,
        unit_accepts=unit_accepts,
        common_accepts=common_accepts,
        logliks=loglik_trace,
        runtime_seconds=time.perf_counter() - started,
        model_name=model.name,
    )
