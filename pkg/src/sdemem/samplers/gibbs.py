"""Blocked Gibbs sampler with correlated pseudo-marginal parameter updates.

One sweep updates, in order:

1. per unit i, a joint MH move of (phi_i, u_i) where u_i is the auxiliary
   stream driving that unit's likelihood estimate;
2. the common parameters (kappa, xi) by MH, conditioning on the current
   streams so the estimate ratio is computed under shared randomness;
3. the hyperparameters eta = (mu, tau) by an exact conjugate draw.

The "blocked" scheme keeps u fixed through step 2's proposal via a
Crank-Nicolson move and reuses it in step 3; the "naive" scheme refreshes
u from scratch in both steps, which inflates the acceptance-ratio noise.
Every random draw comes from a substream keyed by (seed, iteration, unit,
purpose), so chains are reproducible and unit updates are order-free.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .. import aux_random
from ..aux_random import crank_nicolson, init_stream, substream, StreamSpec
from ..errors import (
    ConfigError,
    InvalidStateError,
    NumericalModelError,
    StartupDegeneracyError,
    UnsupportedModelError,
)
from ..filters.lna import lna_forward_filter
from ..filters.particle import bootstrap_filter, bridge_filter
from .adapt import ProposalAdapter, adapt_proposal
from .conjugate import draw_eta_conjugate

__all__ = [
    "AdaptConfig",
    "GibbsConfig",
    "ChainOutput",
    "UnitEvaluator",
    "mh_log_accept",
    "update_unit_block",
    "update_common_block",
    "run_gibbs",
]

_LOG_2PI = float(np.log(2.0 * np.pi))

FILTER_KINDS = ("bootstrap", "bridge", "kalman", "exact", "lna")


@dataclass
class AdaptConfig:
    """Proposal adaptation settings shared by all blocks."""

    enabled: bool = True
    target: float = 0.234
    decay: float = 0.6
    init_sd: float = 0.1
    freeze_after_burn_in: bool = False


@dataclass
class GibbsConfig:
    """Settings for one sampler run.

    n_particles and filter_kind broadcast over units or may be given
    per unit. sort = None enables particle sorting exactly when rho > 0.
    """

    n_iters: int
    burn_in: int = 0
    scheme: str = "blocked"
    rho: float = 0.0
    n_particles: Union[int, Sequence[int]] = 100
    filter_kind: Union[str, Sequence[str]] = "bootstrap"
    transition: str = "exact"
    n_substeps: int = 1
    sort: Optional[bool] = None
    seed: int = 0
    joint_common: bool = True
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    init_phi: Optional[np.ndarray] = None
    init_kappa: Optional[Sequence[float]] = None
    init_xi: Optional[Sequence[float]] = None
    lna_substeps: int = 8
    backend: Optional[str] = None

    @property
    def sort_flag(self):
        return (self.rho > 0.0) if self.sort is None else bool(self.sort)


class UnitEvaluator:
    """Likelihood estimator for one unit under a fixed filter kind."""

    def __init__(self, unit, model, kind, n_particles, sort, transition,
                 n_substeps, lna_substeps, backend):
        if kind not in FILTER_KINDS:
            raise ConfigError(f"unknown filter kind {kind!r}")
        if kind == "bridge" and not model.supports_bridge:
            raise UnsupportedModelError(f"model {model.name} has no bridge support")
        if kind in ("kalman", "exact") and not model.has_exact_loglik:
            raise UnsupportedModelError(f"model {model.name} has no exact likelihood")
        if kind == "lna" and model.lna_support is None:
            raise UnsupportedModelError(f"model {model.name} has no LNA support")
        if kind == "bootstrap" and model.exact_transition is None and model.drift is None:
            raise UnsupportedModelError(f"model {model.name} cannot be particle filtered")
        self.unit = unit
        self.model = model
        self.kind = kind
        self.n_particles = int(n_particles)
        self.sort = bool(sort)
        self.transition = transition
        self.n_substeps = int(n_substeps)
        self.lna_substeps = int(lna_substeps)
        self.backend = backend
        self.uses_u = kind in ("bootstrap", "bridge")
        if self.uses_u and self.n_particles < 1:
            raise ConfigError("n_particles must be >= 1")
        self.stream_spec = None
        if self.uses_u:
            depth = self.n_substeps if (kind == "bootstrap" and transition == "em") else 1
            self.stream_spec = StreamSpec(
                n_obs=unit.n_obs,
                n_substeps=depth,
                n_particles=self.n_particles,
                dim=model.d,
                init_random=not _point_init(model),
            )

    def loglik(self, phi_i, kappa, xi, u):
        if self.kind == "bootstrap":
            return bootstrap_filter(
                self.unit, self.model, kappa, phi_i, xi, self.n_particles, u,
                sort=self.sort, transition=self.transition,
                n_substeps=self.n_substeps, backend=self.backend,
            ).loglik
        if self.kind == "bridge":
            return bridge_filter(
                self.unit, self.model, kappa, phi_i, xi, self.n_particles, u,
                sort=self.sort, backend=self.backend,
            ).loglik
        if self.kind == "lna":
            nat = self.model.to_natural(kappa, phi_i)
            return lna_forward_filter(
                self.unit, self.model.lna_support, nat, xi[0], self.lna_substeps
            )
        return self.model.exact_loglik(self.unit, phi_i, kappa, xi)


def _point_init(model):
    from ..models.base import PointInit

    return isinstance(model.init_state, PointInit)


def mh_log_accept(log_num, log_den):
    """log of the MH acceptance probability min(1, num/den).

    A zero-density proposal (-inf numerator) is always rejected; a
    zero-density current state is an invalid sampler state.
    """
    if np.isnan(log_num) or np.isnan(log_den):
        raise ValueError("acceptance ratio terms must not be NaN")
    if log_den == -np.inf:
        raise InvalidStateError("current state has zero estimated density")
    if log_num == -np.inf:
        return -np.inf
    return min(0.0, float(log_num) - float(log_den))


def _accept(log_alpha, rng):
    # log(U) < log_alpha with U ~ Uniform(0, 1); rejects certainly at -inf.
    return bool(np.log(rng.random()) < log_alpha)


def _proposal_loglik(evaluator, phi_i, kappa, xi, u):
    """Likelihood of a proposed parameter point; domain exits reject.

    Adaptive proposals occasionally land where a filter cannot be evaluated
    in double precision (overflowed natural parameters, variances that
    underflow to zero). Those points carry no usable posterior mass, so the
    evaluation error maps to -inf and the move is rejected. Errors at the
    chain's initial state are raised by run_gibbs before any update touches
    this path.
    """
    try:
        return evaluator.loglik(phi_i, kappa, xi, u)
    except (ValueError, NumericalModelError):
        return -np.inf


def update_unit_block(evaluator, phi_logprior, phi_i, u_i, loglik_i, kappa, xi,
                      adapter, rho, scheme, rng_propose, rng_stream, rng_accept):
    """Joint MH update of one unit's (phi_i, u_i).

    Blocked scheme proposes u* by a Crank-Nicolson move with correlation
    rho; the naive scheme draws a fresh stream. Either way the kernel terms
    cancel, leaving prior ratio times likelihood-estimate ratio.
    Returns (phi_i, u_i, loglik_i, accepted).
    """
    phi_star = adapter.propose(phi_i, rng_propose)
    if evaluator.uses_u:
        if scheme == "blocked":
            u_star = crank_nicolson(u_i, rho, rng_stream)
        else:
            u_star = init_stream(u_i.spec, rng_stream)
    else:
        u_star = u_i
    ll_star = _proposal_loglik(evaluator, phi_star, kappa, xi, u_star)
    log_alpha = mh_log_accept(
        phi_logprior(phi_star) + ll_star, phi_logprior(phi_i) + loglik_i
    )
    if _accept(log_alpha, rng_accept):
        return phi_star, u_star, float(ll_star), True
    return phi_i, u_i, float(loglik_i), False


def update_common_block(evaluators, phi, us, logliks, zeta, common_logprior,
                        unpack, adapter, scheme, rng_propose, rng_accept,
                        fresh_streams=None):
    """MH update of (a block of) the common parameters.

    Blocked scheme evaluates proposal and current likelihoods under the
    same streams us; the naive scheme draws fresh streams (and moves them
    with the parameters on acceptance). With no units the ratio reduces to
    the prior ratio. Returns (zeta, us, logliks, accepted).
    """
    zeta_star = adapter.propose(zeta, rng_propose)
    kappa_star, xi_star = unpack(zeta_star)
    if scheme == "naive":
        u_stars = [
            fresh_streams(i) if ev.uses_u else us[i] for i, ev in enumerate(evaluators)
        ]
    else:
        u_stars = us
    ll_stars = [
        _proposal_loglik(ev, phi[i], kappa_star, xi_star, u_stars[i])
        for i, ev in enumerate(evaluators)
    ]
    log_alpha = mh_log_accept(
        common_logprior(zeta_star) + sum(ll_stars),
        common_logprior(zeta) + sum(logliks),
    )
    if _accept(log_alpha, rng_accept):
        return zeta_star, u_stars, [float(v) for v in ll_stars], True
    return zeta, us, logliks, False


@dataclass
class ChainOutput:
    """Draws and telemetry from one sampler run."""

    columns: Sequence[str]
    draws: np.ndarray
    burn_in: int
    seed: int
    scheme: str
    rho: float
    n_particles: Sequence[int]
    filter_kinds: Sequence[str]
    unit_accepts: np.ndarray
    common_accepts: np.ndarray
    logliks: np.ndarray
    runtime_seconds: float
    model_name: str

    @property
    def n_iters(self):
        return self.draws.shape[0]

    @property
    def post(self):
        return self.draws[self.burn_in :]

    def column(self, name, post=False):
        try:
            j = list(self.columns).index(name)
        except ValueError:
            raise KeyError(f"no chain column {name!r}") from None
        return (self.post if post else self.draws)[:, j]

    def acceptance_rates(self):
        return {
            "units": self.unit_accepts / max(self.n_iters, 1),
            "common": self.common_accepts / max(self.n_iters, 1),
        }


def _phi_logprior_fn(mu, tau):
    lognorm = 0.5 * float(np.sum(np.log(tau))) - 0.5 * mu.size * _LOG_2PI

    def logprior(phi_i):
        r = phi_i - mu
        return lognorm - 0.5 * float(np.sum(tau * r * r))

    return logprior


def _broadcast(value, n, what):
    if isinstance(value, (str, int, np.integer)):
        return [value] * n
    out = list(value)
    if len(out) != n:
        raise ConfigError(f"{what} must be scalar or one per unit")
    return out


def chain_columns(model, n_units):
    cols = [
        f"phi_{i + 1}_{j + 1}" for i in range(n_units) for j in range(model.q)
    ]
    cols += [f"kappa_{k + 1}" for k in range(model.p)]
    cols += [f"xi_{k + 1}" for k in range(model.n_xi)]
    cols += [f"mu_{j + 1}" for j in range(model.q)]
    cols += [f"tau_{j + 1}" for j in range(model.q)]
    return cols


def _common_pack(priors, kappa, xi):
    z = [p.from_natural(v) for p, v in zip(priors.kappa, kappa)]
    z += [p.from_natural(v) for p, v in zip(priors.xi, xi)]
    return np.asarray(z, dtype=float)


def _common_unpack_fn(priors, n_kappa):
    def unpack(zeta):
        kappa = np.array(
            [p.to_natural(z) for p, z in zip(priors.kappa, zeta[:n_kappa])]
        )
        xi = np.array([p.to_natural(z) for p, z in zip(priors.xi, zeta[n_kappa:])])
        return kappa, xi

    return unpack


def _common_logprior_fn(scalar_priors):
    def logprior(zeta):
        return float(
            sum(p.log_density_unconstrained(z) for p, z in zip(scalar_priors, zeta))
        )

    return logprior


def run_gibbs(dataset, model, priors, config, on_iteration=None):
    """Run the sampler and return its ChainOutput.

    Draw j of the output is the state after sweep j; burn-in is recorded
    but not removed. on_iteration(j, row, info) is called per sweep with
    info = {"loglik", "unit_accepts", "common_accepts"}.
    """
    if config.scheme not in ("blocked", "naive"):
        raise ConfigError(f"unknown scheme {config.scheme!r}")
    if config.scheme == "naive" and config.rho != 0.0:
        raise ConfigError("the naive scheme refreshes u from scratch; set rho = 0")
    if not 0.0 <= config.rho < 1.0:
        raise ConfigError("rho must lie in [0, 1) for sampling")
    if config.n_iters < 1:
        raise ConfigError("n_iters must be >= 1")
    if not 0 <= config.burn_in < config.n_iters:
        raise ConfigError("burn_in must lie in [0, n_iters)")

    m = dataset.n_units
    kinds = _broadcast(config.filter_kind, m, "filter_kind")
    counts = _broadcast(config.n_particles, m, "n_particles")
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
    if phi.shape != (m, model.q):
        raise ConfigError(f"init_phi must have shape {(m, model.q)}")
    if len(priors.kappa) != model.p or len(priors.xi) != model.n_xi:
        raise ConfigError("prior count does not match model parameter count")
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
    if kappa.size != model.p or xi.size != model.n_xi:
        raise ConfigError("initial kappa/xi have wrong length")

    seed = int(config.seed)
    us = []
    logliks = []
    for i, ev in enumerate(evaluators):
        u = (
            init_stream(ev.stream_spec, substream(seed, 0, i, aux_random.PURPOSE_INIT_U))
            if ev.uses_u
            else None
        )
        ll = ev.loglik(phi[i], kappa, xi, u)
        if ll == -np.inf:
            raise StartupDegeneracyError(
                f"unit {dataset.units[i].unit_id}: zero likelihood estimate at the "
                "initial state; adjust initial parameters or particle count",
                unit_id=dataset.units[i].unit_id,
            )
        us.append(u)
        logliks.append(float(ll))

    ad = config.adapt
    unit_adapters = [
        ProposalAdapter.fresh(model.q, ad.init_sd, ad.target, ad.decay) for _ in range(m)
    ]
    zeta = _common_pack(priors, kappa, xi)
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
    unpack = _common_unpack_fn(priors, model.p)
    all_priors = list(priors.kappa) + list(priors.xi)

    columns = chain_columns(model, m)
    draws = np.empty((config.n_iters, len(columns)))
    loglik_trace = np.empty(config.n_iters)
    unit_accepts = np.zeros(m)
    common_accepts = np.zeros(len(blocks))
    started = time.perf_counter()

    for j in range(1, config.n_iters + 1):
        adapting = ad.enabled and not (ad.freeze_after_burn_in and j > config.burn_in)
        phi_logprior = _phi_logprior_fn(mu, tau)
        for i, ev in enumerate(evaluators):
            phi_i, u_i, ll_i, acc = update_unit_block(
                ev, phi_logprior, phi[i], us[i], logliks[i], kappa, xi,
                unit_adapters[i], config.rho, config.scheme,
                substream(seed, j, i, aux_random.PURPOSE_PROPOSE),
                substream(seed, j, i, aux_random.PURPOSE_CN),
                substream(seed, j, i, aux_random.PURPOSE_ACCEPT),
            )
            phi[i] = phi_i
            us[i] = u_i
            logliks[i] = ll_i
            unit_accepts[i] += acc
            if adapting:
                adapt_proposal(unit_adapters[i], acc, phi[i], j)

        for b, (idx, block_priors) in enumerate(blocks):
            sentinel = m + b
            sub_zeta = zeta[idx]
            sub_logprior = _common_logprior_fn(block_priors)

            def block_unpack(sub, idx=idx):
                full = zeta.copy()
                full[idx] = sub
                return unpack(full)

            fresh = (
                lambda i, j=j, b=b: init_stream(
                    evaluators[i].stream_spec,
                    substream(
                        seed, j, i,
                        aux_random.PURPOSE_COMMON_U if b == 0
                        else aux_random.PURPOSE_COMMON_U_SEP,
                    ),
                )
            )
            sub_zeta, us, logliks, acc = update_common_block(
                evaluators, phi, us, logliks, sub_zeta, sub_logprior,
                block_unpack, common_adapters[b], config.scheme,
                substream(seed, j, sentinel, aux_random.PURPOSE_PROPOSE),
                substream(seed, j, sentinel, aux_random.PURPOSE_ACCEPT),
                fresh_streams=fresh,
            )
            zeta[idx] = sub_zeta
            kappa, xi = unpack(zeta)
            common_accepts[b] += acc
            if adapting:
                adapt_proposal(common_adapters[b], acc, sub_zeta, j)

        mu, tau = draw_eta_conjugate(
            phi, priors.eta, substream(seed, j, m, aux_random.PURPOSE_ETA)
        )

        row = np.concatenate([phi.ravel(), kappa, xi, mu, tau])
        if not np.all(np.isfinite(row)):
            raise NumericalModelError(f"nonfinite chain state at iteration {j}")
        draws[j - 1] = row
        loglik_trace[j - 1] = sum(logliks)
        if on_iteration is not None:
            on_iteration(
                j, row,
                {
                    "loglik": loglik_trace[j - 1],
                    "unit_accepts": unit_accepts.copy(),
                    "common_accepts": common_accepts.copy(),
                },
            )

    return ChainOutput(
        columns=columns,
        draws=draws,
        burn_in=config.burn_in,
        seed=seed,
        scheme=config.scheme,
        rho=config.rho,
        n_particles=[ev.n_particles for ev in evaluators],
        filter_kinds=kinds,
        unit_accepts=unit_accepts,
        common_accepts=common_accepts,
        logliks=loglik_trace,
        runtime_seconds=time.perf_counter() - started,
        model_name=model.name,
    )
