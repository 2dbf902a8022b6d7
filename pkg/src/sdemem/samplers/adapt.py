"""Adaptive random-walk proposals with diminishing adaptation.

Each block keeps a running mean and covariance of its chain plus a global
scale steered toward a target acceptance rate. Step sizes gamma_t = t^-0.6
decay fast enough for ergodicity and slow enough to keep adapting, so
adaptation can stay on for the whole run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

__all__ = ["ProposalAdapter", "adapt_proposal"]

TARGET_RATE = 0.234
DECAY = 0.6
COV_JITTER = 1e-8
# The first few gamma_t are close to 1, which lets a couple of lucky accepts
# inflate the scale by e^0.77 each; capping the scale gain keeps early moves
# sane without breaking the diminishing-adaptation property.
MAX_SCALE_GAIN = 0.25
LOG_SCALE_BOUND = 30.0


@dataclass
class ProposalAdapter:
    """State of one adaptive Gaussian random-walk proposal."""

    dim: int
    mean: np.ndarray
    cov: np.ndarray
    log_scale: float
    target: float = TARGET_RATE
    decay: float = DECAY
    count: int = 0

    @classmethod
    def fresh(cls, dim, init_sd=0.1, target=TARGET_RATE, decay=DECAY):
        if dim < 1:
            raise ConfigError("adapter dimension must be >= 1")
        return cls(
            dim=dim,
            mean=np.zeros(dim),
            cov=init_sd * init_sd * np.eye(dim),
            log_scale=float(np.log(2.38 / np.sqrt(dim))),
            target=target,
            decay=decay,
        )

    def proposal_cov(self):
        scale2 = float(np.exp(2.0 * self.log_scale))
        return scale2 * (self.cov + COV_JITTER * np.eye(self.dim))

    def propose(self, current, rng):
        root = np.linalg.cholesky(self.proposal_cov())
        return np.asarray(current, dtype=float) + root @ rng.standard_normal(self.dim)


def adapt_proposal(adapter, accepted, point, iteration):
    """One diminishing-adaptation update; returns the adapter.

    ``point`` is the post-decision chain state for the block (the proposal
    when accepted, the retained state otherwise); ``iteration`` is 1-based.
    """
    if iteration < 1:
        raise ConfigError("iteration must be >= 1")
    g = float(iteration) ** -adapter.decay
    dev = np.asarray(point, dtype=float) - adapter.mean
    adapter.mean = adapter.mean + g * dev
    adapter.cov = adapter.cov + g * (np.outer(dev, dev) - adapter.cov)
    gs = min(g, MAX_SCALE_GAIN)
    adapter.log_scale += gs * ((1.0 if accepted else 0.0) - adapter.target)
    if adapter.log_scale > LOG_SCALE_BOUND:
        adapter.log_scale = LOG_SCALE_BOUND
    elif adapter.log_scale < -LOG_SCALE_BOUND:
        adapter.log_scale = -LOG_SCALE_BOUND
    adapter.count += 1
    return adapter
