"""Auxiliary-variable streams for correlated pseudo-marginal samplers.

A particle filter driven by a fixed block of standard Gaussian variates is a
deterministic function of those variates, which lets an MCMC sampler treat
them as auxiliary state. This module owns that representation: sized stream
allocation, the Crank-Nicolson update that correlates successive streams,
the Gaussian-to-uniform map used for resampling, systematic resampling
itself, and the seeded substream derivation that makes every draw in a run
reproducible regardless of execution order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DegenerateKernelError, DegenerateWeightsError

__all__ = [
    "StreamSpec",
    "AuxStream",
    "init_stream",
    "crank_nicolson",
    "kernel_log_density",
    "gaussian_log_density",
    "gaussian_to_uniform",
    "systematic_resample",
    "substream",
    "stream_checksum",
]

# Purpose tags for substream derivation. Keyed streams mean that skipping a
# purpose (e.g. no CN update for an exact-likelihood unit) never shifts the
# variates consumed by any other purpose.
PURPOSE_INIT_U = 0
PURPOSE_PROPOSE = 1
PURPOSE_CN = 2
PURPOSE_ACCEPT = 3
PURPOSE_COMMON_U = 4
PURPOSE_ETA = 5
PURPOSE_TUNE = 6
PURPOSE_SIM = 7
PURPOSE_COMMON_U_SEP = 8
PURPOSE_TUNE_CN = 9

_LOG_2PI = float(np.log(2.0 * np.pi))

# Open-interval bounds for the uniform map: resampling positions must stay
# strictly inside (0, 1) even for extreme Gaussian inputs.
_UNIF_LO = np.nextafter(0.0, 1.0)
_UNIF_HI = 1.0 - 2.0 ** -53


def substream(seed, iteration, unit, purpose):
    """Return a Generator keyed by (seed, iteration, unit, purpose).

    The same key always yields the same stream, so samplers can draw for
    units in any order (or skip draws entirely) without perturbing the
    variates seen elsewhere in the run.
    """
    ss = np.random.SeedSequence(
        entropy=[int(seed), int(iteration), int(unit), int(purpose)]
    )
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class StreamSpec:
    """Shape of the auxiliary stream needed by one unit's filter run.

    Parameters
    ----------
    n_obs : int
        Number of observation times.
    n_substeps : int
        Propagation substeps per observation gap (L). Exact transitions use
        only the first substep row; the stream is sized for the maximum so
        one allocation serves both cases.
    n_particles : int
        Particle count N.
    dim : int
        State dimension d.
    init_random : bool
        Whether the initial state consumes the init block.
    """

    n_obs: int
    n_substeps: int
    n_particles: int
    dim: int
    init_random: bool = False

    def __post_init__(self):
        for name in ("n_obs", "n_substeps", "n_particles", "dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def prop_size(self):
        return self.n_obs * self.n_substeps * self.n_particles * self.dim

    @property
    def total_size(self):
        return self.prop_size + self.n_obs + self.n_particles * self.dim


@dataclass(frozen=True)
class AuxStream:
    """Immutable block of N(0,1) variates driving one filter evaluation.

    ``prop_block`` has shape [n_obs, L, N, d] (row 0 is allocated but unused
    because the filter initializes at the first observation), ``resample_block``
    one variate per observation time, ``init_block`` [N, d] for random initial
    states. Arrays are write-protected; updates construct new streams.
    """

    spec: StreamSpec
    prop_block: np.ndarray
    resample_block: np.ndarray
    init_block: np.ndarray

    def flat(self):
        """All variates as one vector, in allocation order."""
        return np.concatenate(
            [self.prop_block.ravel(), self.resample_block, self.init_block.ravel()]
        )


def _from_flat(spec, draws):
    s = spec
    prop = draws[: s.prop_size].reshape(s.n_obs, s.n_substeps, s.n_particles, s.dim)
    resample = draws[s.prop_size : s.prop_size + s.n_obs]
    init = draws[s.prop_size + s.n_obs :].reshape(s.n_particles, s.dim)
    for b in (prop, resample, init):
        b.setflags(write=False)
    return AuxStream(spec=s, prop_block=prop, resample_block=resample, init_block=init)


def init_stream(spec, rng):
    """Draw a fresh stream of independent N(0,1) variates sized by ``spec``."""
    return _from_flat(spec, rng.standard_normal(spec.total_size))


def _check_rho(rho):
    rho = float(rho)
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(f"rho must lie in [0, 1], got {rho}")
    return rho


def crank_nicolson(u, rho, rng):
    """Propose u' = rho u + sqrt(1 - rho^2) w with w ~ N(0, I).

    Draws w in the same order as :func:`init_stream`, so at rho = 0 the
    proposal is bit-identical to a fresh stream from the same generator.
    At rho = 1 the input stream is returned unchanged. The input is never
    mutated.
    """
    rho = _check_rho(rho)
    if rho == 1.0:
        return u
    omega = rng.standard_normal(u.spec.total_size)
    if rho == 0.0:
        return _from_flat(u.spec, omega)
    c = float(np.sqrt(1.0 - rho * rho))
    return _from_flat(u.spec, rho * u.flat() + c * omega)


def _as_flat(u):
    if isinstance(u, AuxStream):
        return u.flat()
    return np.asarray(u, dtype=float).ravel()


def kernel_log_density(u_to, u_from, rho):
    """Log density of the Crank-Nicolson kernel K(u_to | u_from).

    Componentwise N(u_to; rho u_from, (1 - rho^2) I). Together with the
    N(0, I) reference density this satisfies the detailed-balance identity
    g(u) K(u'|u) = g(u') K(u|u'), which is why the kernel terms cancel from
    pseudo-marginal acceptance ratios. rho = 1 has no density.
    """
    rho = _check_rho(rho)
    if rho == 1.0:
        raise DegenerateKernelError("Crank-Nicolson kernel has no density at rho = 1")
    a = _as_flat(u_to)
    b = _as_flat(u_from)
    if a.shape != b.shape:
        raise ConfigError("u_to and u_from have mismatched sizes")
    var = 1.0 - rho * rho
    resid = a - rho * b
    return -0.5 * (a.size * (_LOG_2PI + np.log(var)) + resid @ resid / var)


def gaussian_log_density(u):
    """Log density of the N(0, I) reference law g at ``u``."""
    a = _as_flat(u)
    return -0.5 * (a.size * _LOG_2PI + a @ a)


def gaussian_to_uniform(z):
    """Map N(0,1) variates to (0, 1) uniforms via the standard normal CDF.

    The output is clipped to the open interval so downstream resampling
    positions remain valid for arbitrarily extreme inputs.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("gaussian_to_uniform requires finite input")
    p = np.clip(ndtr(z), _UNIF_LO, _UNIF_HI)
    return float(p) if p.ndim == 0 else p


def systematic_resample(weights, uniform, n_out=None):
    """Systematic resampling: ancestor indices from one uniform.

    Places n_out points uniform/n_out + k/n_out on [0, 1) and returns, for
    each, the index of the first cumulative-weight interval containing it.
    Expected offspring counts equal n_out * weights exactly.

    Parameters
    ----------
    weights : array
        Normalized weights (nonnegative, summing to 1 within 1e-12).
    uniform : float
        Single draw in [0, 1).
    n_out : int, optional
        Number of ancestors to draw; defaults to len(weights).
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ConfigError("weights must be a nonempty 1-D array")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise DegenerateWeightsError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0.0:
        raise DegenerateWeightsError("weights are all zero")
    if abs(total - 1.0) > 1e-12:
        raise DegenerateWeightsError(f"weights sum to {total!r}, expected 1")
    uniform = float(uniform)
    if not 0.0 <= uniform < 1.0:
        raise ValueError(f"uniform must lie in [0, 1), got {uniform}")
    n = w.size if n_out is None else int(n_out)
    if n < 1:
        raise ConfigError("n_out must be >= 1")
    positions = (uniform + np.arange(n)) / n
    idx = np.searchsorted(np.cumsum(w), positions, side="left")
    # cumulative sum can fall short of 1 by round-off; clamp the tail
    return np.minimum(idx, w.size - 1).astype(np.int64)


def stream_checksum(u):
    """Short stable hash of a stream's contents, for debugging telemetry."""
    h = hashlib.blake2b(digest_size=8)
    h.update(np.ascontiguousarray(u.prop_block).tobytes())
    h.update(np.ascontiguousarray(u.resample_block).tobytes())
    h.update(np.ascontiguousarray(u.init_block).tobytes())
    return h.hexdigest()
